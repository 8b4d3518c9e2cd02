#include "pitchfork/gronwall.hpp"

#include <cmath>

namespace pitchfork::flow {

IneqCheck check_comparison_ineq(const GronwallParams& p) {
  IneqCheck out;
  if (!(p.s > 0.0)) {
    out.ok = false;
    out.violated = "s <= 0";
    return out;
  }
  const double cap = p.s / 4.0;
  auto fail = [&](const std::string& what) {
    out.ok = false;
    if (!out.violated.empty()) out.violated += ", ";
    out.violated += what;
  };
  if (!(p.sigma < cap)) fail("sigma >= s/4");
  if (!(p.nu < cap)) fail("nu >= s/4");
  if (!(p.sigma * p.sigma < cap)) fail("sigma^2 >= s/4");
  if (!(p.nu * p.nu < cap)) fail("nu^2 >= s/4");
  if (p.sigma < 0.0 || p.nu < 0.0) fail("negative sigma or nu");
  return out;
}

GronwallBounds::GronwallBounds(const GronwallParams& p) : params_(p) {
  const double s = p.s, sigma = p.sigma, nu = p.nu;
  const double tr = nu - 2.0 * s;
  const double disc = std::sqrt((nu + 2.0 * s) * (nu + 2.0 * s) +
                                4.0 * sigma * sigma);
  lambda_plus_ = 0.5 * (tr + disc);
  lambda_minus_ = 0.5 * (tr - disc);

  // the printed closed form (its discriminant and sign convention do not
  // match the matrix; kept for the discrepancy columns)
  const double d = 2.0 * s - nu;
  const double root = std::sqrt(1.0 + (4.0 * sigma * sigma + nu * nu) /
                                          (d * d));
  lambda_plus_printed_ = -0.5 * d * (1.0 + root);
  lambda_minus_printed_ = -0.5 * d * (1.0 - root);

  // orthonormal eigenvectors of the symmetric comparison matrix
  if (sigma == 0.0) {
    eigvecs_ = Eigen::Matrix2d::Identity();
    // identity columns: first column pairs with -2s, second with nu
  } else {
    Eigen::Vector2d v_minus(sigma, lambda_minus_ + 2.0 * s);
    Eigen::Vector2d v_plus(sigma, lambda_plus_ + 2.0 * s);
    eigvecs_.col(0) = v_minus.normalized();
    eigvecs_.col(1) = v_plus.normalized();
  }
}

Eigen::Matrix2d GronwallBounds::reference(double t) const {
  Eigen::Vector2d lambdas;
  if (params_.sigma == 0.0) {
    lambdas << -2.0 * params_.s, params_.nu;
  } else {
    lambdas << lambda_minus_, lambda_plus_;
  }
  const Eigen::Matrix2d scale =
      Eigen::Vector2d(std::exp(lambdas(0) * t), std::exp(lambdas(1) * t))
          .asDiagonal();
  return eigvecs_ * scale * eigvecs_.transpose();
}

double GronwallBounds::E(int i, double t) const {
  const Eigen::Matrix2d m = reference(t);
  switch (i) {
    case 0: return m(0, 0);
    case 1: return m(0, 1);
    case 2: return m(1, 0);
    case 3: return m(1, 1);
  }
  throw Error("GronwallBounds::E: index must be 0..3");
}

std::array<double, 4> GronwallBounds::kappas(Reading reading) const {
  const double s = params_.s, sigma = params_.sigma, nu = params_.nu;
  const double lp = lambda_plus_, lm = lambda_minus_;
  const double amb = reading == Reading::Difference ? (lm - nu) : (lm * nu);
  const double lp2s = lp + 2.0 * s;
  const double kappa1 =
      1.0 - sigma * sigma / (lp2s * (lp2s + sigma * sigma * (lm - nu)));
  const double kappa2 =
      -sigma / (amb * lp2s * (lp2s + sigma * sigma * (lm - nu)));
  const double kbar1 = sigma * amb / (lp2s * (lm - nu) + sigma * sigma);
  const double kbar2 = 1.0 / (1.0 + sigma * sigma / (lp2s * (lm - nu)));
  return {kappa1, kappa2, kbar1, kbar2};
}

std::array<double, 4> GronwallBounds::printed(double t,
                                              Reading reading) const {
  const double s = params_.s, sigma = params_.sigma, nu = params_.nu;
  const double lp = lambda_plus_, lm = lambda_minus_;
  const double amb = reading == Reading::Difference ? (lm - nu) : (lm * nu);
  const auto [kappa1, kappa2, kbar1, kbar2] = kappas(reading);
  const double ep = std::exp(lp * t), em = std::exp(lm * t);
  const double lp2s = lp + 2.0 * s;
  const double e0 = kappa1 * em - sigma / lp2s * kappa2 * ep;
  const double e2 = sigma / (lm - nu) * kappa1 * em - kappa2 * ep;
  const double e1 = kbar1 * em - sigma / lp2s * kbar2 * ep;
  const double e3 = sigma / amb * kbar1 * em - kbar2 * ep;
  // sigma = 0 limits: the 0 * (1/0) products above mean "no coupling"
  auto clean = [sigma](double raw, double uncoupled) {
    if (sigma == 0.0 && !std::isfinite(raw)) return uncoupled;
    return raw;
  };
  return {clean(e0, std::exp(lm * t)), clean(e1, 0.0), clean(e2, 0.0),
          clean(e3, -std::exp(lp * t))};
}

std::array<double, 4> GronwallBounds::discrepancy(double t,
                                                  Reading reading) const {
  const auto p = printed(t, reading);
  std::array<double, 4> out{};
  for (int i = 0; i < 4; ++i)
    out[i] = std::isfinite(p[i]) ? std::abs(p[i] - E(i, t))
                                 : std::numeric_limits<double>::infinity();
  return out;
}

double GronwallBounds::bound(int i, double t) const {
  const double ref = E(i, t);
  const double prt = printed(t, Reading::Difference)[i];
  return std::isfinite(prt) ? std::max(ref, prt) : ref;
}

Eigen::Matrix2d GronwallBounds::rk4_reference(double t, double h) const {
  Eigen::Matrix2d c;
  c << -2.0 * params_.s, params_.sigma, params_.sigma, params_.nu;
  Eigen::Matrix2d u = Eigen::Matrix2d::Identity();
  const double dir = t >= 0.0 ? 1.0 : -1.0;
  double remaining = std::abs(t);
  while (remaining > 0.0) {
    const double step = dir * std::min(h, remaining);
    const Eigen::Matrix2d k1 = c * u;
    const Eigen::Matrix2d k2 = c * (u + 0.5 * step * k1);
    const Eigen::Matrix2d k3 = c * (u + 0.5 * step * k2);
    const Eigen::Matrix2d k4 = c * (u + step * k3);
    u += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    remaining -= std::abs(step);
  }
  return u;
}

GronwallBounds gronwall_bounds(const GronwallParams& p) {
  const auto check = check_comparison_ineq(p);
  if (!check.ok)
    throw ParamsViolateIneq("comparison parameters violate the inequality: " +
                            check.violated);
  return GronwallBounds(p);
}

GronwallBounds gronwall_bounds_unchecked(const GronwallParams& p) {
  return GronwallBounds(p);
}

}  // namespace pitchfork::flow
