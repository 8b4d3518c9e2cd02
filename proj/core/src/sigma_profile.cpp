#include "pitchfork/sigma_profile.hpp"

#include <cmath>

#include "pitchfork/rootfind.hpp"

namespace pitchfork {

double solve_monotone(const std::function<double(double)>& fn,
                      const std::function<double(double)>& dfn, double target,
                      double lo, double hi, double tol, int max_iter) {
  double flo = fn(lo) - target;
  double fhi = fn(hi) - target;
  std::vector<double> trace;
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (flo * fhi > 0.0)
    throw NewtonDivergence("solve_monotone: bracket does not straddle target",
                           {lo, hi});
  const bool increasing = fhi > 0.0;
  double s = 0.5 * (lo + hi);
  for (int it = 0; it < max_iter; ++it) {
    const double res = fn(s) - target;
    trace.push_back(s);
    if (std::abs(res) <= tol) return s;
    if ((res > 0.0) == increasing)
      hi = s;
    else
      lo = s;
    const double d = dfn(s);
    double next = s - res / d;
    if (!(std::isfinite(next)) || next <= lo || next >= hi)
      next = 0.5 * (lo + hi);
    if (next == s) {
      // FP fixed point of the update; accept if bracket is exhausted
      if (hi - lo <= 4.0 * std::abs(s) * 1e-16) return s;
      next = 0.5 * (lo + hi);
    }
    s = next;
  }
  // converged bracket counts as success even if the residual tolerance is
  // stricter than what FP arithmetic supports
  if (hi - lo <= 8.0 * std::max(1.0, std::abs(s)) * 1e-16) return s;
  throw NewtonDivergence("solve_monotone: no convergence", trace);
}

}  // namespace pitchfork

namespace pitchfork::dynsys {

namespace {

double cubic(double s, double mu) {
  const double u = s - 1.0;
  return 1.0 - u * u * u + mu * u;
}

double dcubic(double s, double mu) {
  const double u = s - 1.0;
  return -3.0 * u * u + mu;
}

struct Hermite {
  double a, h, p0, p1, m0, m1;

  double value(double s) const {
    const double t = (s - a) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * p0 + (t3 - 2 * t2 + t) * h * m0 +
           (-2 * t3 + 3 * t2) * p1 + (t3 - t2) * h * m1;
  }
  double deriv(double s) const {
    const double t = (s - a) / h;
    const double t2 = t * t;
    return ((6 * t2 - 6 * t) * (p0 - p1)) / h + (3 * t2 - 4 * t + 1) * m0 +
           (3 * t2 - 2 * t) * m1;
  }
};

}  // namespace

double SigmaProfile::value(double s) const {
  if (s >= kCoreLo && s <= kCoreHi) return cubic(s, mu_);
  if (s <= kBlendLo) return cubic(kCoreLo, mu_) + 0.05;
  if (s >= kBlendHi) return cubic(kCoreHi, mu_) - 0.05;
  if (s < kCoreLo) {
    Hermite blend{kBlendLo,          kCoreLo - kBlendLo, cubic(kCoreLo, mu_) + 0.05,
                  cubic(kCoreLo, mu_), 0.0,               dcubic(kCoreLo, mu_)};
    return blend.value(s);
  }
  Hermite blend{kCoreHi,           kBlendHi - kCoreHi, cubic(kCoreHi, mu_),
                cubic(kCoreHi, mu_) - 0.05, dcubic(kCoreHi, mu_), 0.0};
  return blend.value(s);
}

double SigmaProfile::deriv(double s) const {
  if (s >= kCoreLo && s <= kCoreHi) return dcubic(s, mu_);
  if (s <= kBlendLo || s >= kBlendHi) return 0.0;
  if (s < kCoreLo) {
    Hermite blend{kBlendLo,          kCoreLo - kBlendLo, cubic(kCoreLo, mu_) + 0.05,
                  cubic(kCoreLo, mu_), 0.0,               dcubic(kCoreLo, mu_)};
    return blend.deriv(s);
  }
  Hermite blend{kCoreHi,           kBlendHi - kCoreHi, cubic(kCoreHi, mu_),
                cubic(kCoreHi, mu_) - 0.05, dcubic(kCoreHi, mu_), 0.0};
  return blend.deriv(s);
}

double SigmaProfile::radial_inverse(double rho) const {
  double lo = 0.25, hi = 2.0;
  // expand until the bracket straddles rho (radial is increasing)
  for (int i = 0; i < 8 && radial(lo) > rho; ++i) lo *= 0.5;
  for (int i = 0; i < 8 && radial(hi) < rho; ++i) hi *= 1.5;
  return solve_monotone([this](double s) { return radial(s); },
                        [this](double s) { return radial_deriv(s); }, rho, lo,
                        hi);
}

}  // namespace pitchfork::dynsys
