#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pitchfork {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Projection is not unique (query at a focal point, e.g. the origin for
/// the built-in circle/sphere), or the numeric projector failed to settle.
class AmbiguousProjection : public Error {
 public:
  using Error::Error;
};

/// A tubular point violates the |r| <= alpha bound of the active region.
class OutsideTube : public Error {
 public:
  using Error::Error;
};

/// A map or flow image escaped the declared tubular neighborhood.
class LeftTube : public Error {
 public:
  using Error::Error;
};

/// Scalar or damped Newton failed to converge; carries the iterate trace.
class NewtonDivergence : public Error {
 public:
  NewtonDivergence(const std::string& msg, std::vector<double> trace)
      : Error(msg), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

class NoInverseProvided : public Error {
 public:
  using Error::Error;
};

class NotRotation : public Error {
 public:
  using Error::Error;
};

class UnsupportedManifold : public Error {
 public:
  using Error::Error;
};

class InterpolationOutOfRange : public Error {
 public:
  using Error::Error;
};

/// Fixed-point iteration observed non-contracting behavior.
class NotContracting : public Error {
 public:
  using Error::Error;
};

/// Graph values crossed zero mid-run; branches must stay one-sided.
class BranchCollapse : public Error {
 public:
  using Error::Error;
};

/// Bisection target never crosses the threshold on the search interval.
class NoCrossing : public Error {
 public:
  using Error::Error;
};

/// Comparison-system parameters violate sigma, nu, sigma^2, nu^2 < s/4.
class ParamsViolateIneq : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent problem-definition input.
class SpecError : public Error {
 public:
  using Error::Error;
};

}  // namespace pitchfork
