#pragma once

namespace pitchfork::dynsys {

/// Radial profile of the canonical map family.  On the core interval
/// [4/5, 6/5] it is exactly the cubic 1 - (s-1)^3 + mu*(s-1); outside it is
/// extended C^1 by Hermite blends over [0.7, 0.8] and [1.2, 1.3] to the
/// constants value(0.8) + 0.05 and value(1.2) - 0.05, so the profile is
/// flat near 0 and s * value(s) stays strictly increasing for
/// |mu| <= 1/25.
class SigmaProfile {
 public:
  explicit SigmaProfile(double mu) : mu_(mu) {}

  double mu() const { return mu_; }

  double value(double s) const;
  double deriv(double s) const;

  /// Radius map s -> s * sigma(s) and its derivative.
  double radial(double s) const { return s * value(s); }
  double radial_deriv(double s) const { return value(s) + s * deriv(s); }

  /// Solves s * sigma(s) = rho (unique by monotonicity); guarded Newton.
  double radial_inverse(double rho) const;

  static constexpr double kCoreLo = 0.8;
  static constexpr double kCoreHi = 1.2;
  static constexpr double kBlendLo = 0.7;
  static constexpr double kBlendHi = 1.3;

 private:
  double mu_;
};

}  // namespace pitchfork::dynsys
