#pragma once

#include <functional>
#include <vector>

#include "pitchfork/errors.hpp"

namespace pitchfork {

/// Bracket-guarded Newton for a monotone scalar equation fn(s) = target.
/// Falls back to bisection whenever the Newton step leaves the bracket or
/// the derivative degenerates.  Throws NewtonDivergence (with the iterate
/// trace) if [lo, hi] does not straddle the target or the iteration stalls.
double solve_monotone(const std::function<double(double)>& fn,
                      const std::function<double(double)>& dfn, double target,
                      double lo, double hi, double tol = 1e-14,
                      int max_iter = 50);

}  // namespace pitchfork
