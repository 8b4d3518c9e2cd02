#pragma once

#include <array>
#include <string>

#include "pitchfork/errors.hpp"
#include "pitchfork/linalg.hpp"

namespace pitchfork::flow {

/// Parameters of the 2x2 linear comparison system
/// [[-2s, sigma], [sigma, nu]]: decay rate s, off-diagonal bound sigma,
/// tangential bound nu, and the validity horizon t*.
struct GronwallParams {
  double s = 1.0;
  double sigma = 0.0;
  double nu = 0.0;
  double t_star = 2.0;
};

struct IneqCheck {
  bool ok = true;
  std::string violated;  // comma-separated failing clauses
};

/// sigma, nu, sigma^2, nu^2 < s/4 (degenerate sigma = nu = 0 allowed).
IneqCheck check_comparison_ineq(const GronwallParams& p);

/// Bounds E_0..E_3 of the comparison system.  The authoritative values are
/// the exact eigendecomposition solution of the matrix exponential; the
/// textbook closed forms are also evaluated (under both readings of their
/// ambiguous products) and their discrepancies recorded.
class GronwallBounds {
 public:
  enum class Reading { Difference, Product };

  explicit GronwallBounds(const GronwallParams& p);

  const GronwallParams& params() const { return params_; }

  /// Eigenvalues of the comparison matrix (lambda_minus < 0 <= lambda_plus).
  double lambda_plus() const { return lambda_plus_; }
  double lambda_minus() const { return lambda_minus_; }

  /// The closed-form lambdas as printed (they disagree with the
  /// eigenvalues; kept for the discrepancy log).
  double lambda_plus_printed() const { return lambda_plus_printed_; }
  double lambda_minus_printed() const { return lambda_minus_printed_; }

  /// expm(C t) (the reference solution of the comparison IVP).
  Eigen::Matrix2d reference(double t) const;

  /// Reference entries: E0 = u, E1 = v, E2 = w, E3 = z.
  double E(int i, double t) const;

  /// kappa1, kappa2, kappa1_bar, kappa2_bar under a reading of the
  /// ambiguous "(lambda_- nu)" products.
  std::array<double, 4> kappas(Reading reading) const;

  /// The printed closed forms for E0..E3 under a reading; entries may be
  /// NaN when a reading divides by zero.
  std::array<double, 4> printed(double t, Reading reading) const;

  /// max |printed - reference| entrywise, for a reading.
  std::array<double, 4> discrepancy(double t, Reading reading) const;

  /// Bound used downstream: max(reference, printed under the Difference
  /// reading) entrywise, ignoring non-finite printed values.
  double bound(int i, double t) const;

  /// RK4-integrated solution of the comparison IVP (cross-validation).
  Eigen::Matrix2d rk4_reference(double t, double h = 1e-4) const;

 private:
  GronwallParams params_;
  double lambda_plus_ = 0.0, lambda_minus_ = 0.0;
  double lambda_plus_printed_ = 0.0, lambda_minus_printed_ = 0.0;
  Eigen::Matrix2d eigvecs_;  // orthonormal columns
};

/// Validates the inequality and builds the bounds; throws
/// ParamsViolateIneq on invalid parameters.
GronwallBounds gronwall_bounds(const GronwallParams& p);

/// Builds the bounds without the inequality gate (for tabulating flagged
/// rows).
GronwallBounds gronwall_bounds_unchecked(const GronwallParams& p);

}  // namespace pitchfork::flow
