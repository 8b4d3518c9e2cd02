#include <cmath>

#include "doctest.h"
#include "pitchfork/hypotheses.hpp"
#include "test_helpers.hpp"

using namespace pitchfork;
using namespace pitchfork::hypotheses;
using dynsys::MapFamily;
using dynsys::SigmaProfile;
using geometry::TubularRegion;

namespace {

MapFamily canonical2() {
  return dynsys::canonical_family(2, dynsys::rotation2d(0.5));
}

/// Independent oracle for ||D_r f|| over a radial band: dense 1e-6-step
/// scan of the closed-form radius-map slope.
double dense_scan_drf(double mu, double lo, double hi) {
  const SigmaProfile sigma(mu);
  double sup = 0.0;
  const double step = 1e-6;
  const int count = static_cast<int>((hi - lo) / step);
  for (int i = 0; i <= count; ++i)
    sup = std::max(sup, std::abs(sigma.radial_deriv(lo + i * step)));
  return std::max(sup, std::abs(sigma.radial_deriv(hi)));
}

NormReport synthetic_report(double drf, double dyf, double drg_hat,
                            double dyg_hat) {
  NormReport r;
  r.drf = drf;
  r.dyf = dyf;
  r.drg_hat = drg_hat;
  r.dyg_hat = dyg_hat;
  r.c = drf;
  r.c_star = drf * (1.0 + drg_hat) + dyf;
  r.sigma = drf * (2.0 * drg_hat + dyg_hat) + dyf * drg_hat;
  r.cor_ix = drf * drg_hat + (drf + dyf) * (1.0 + drg_hat);
  return r;
}

}  // namespace

TEST_CASE("norm report on the shell {0.15 <= d <= 0.2} at mu = 1/50") {
  auto fam = canonical2();
  auto mesh = geometry::build_mesh(fam.manifold, 64);
  const TubularRegion shell{0.2, 0.15, TubularRegion::Side::Both};
  const auto report = estimate_norms(fam, 0.02, shell, *mesh, 64);

  SUBCASE("analytically-zero blocks stay below 1e-10") {
    CHECK(report.dyf < 1e-10);
    CHECK(report.drg < 1e-10);
    CHECK(report.drg_hat < 1e-10);
    CHECK(std::abs(report.dyg_hat - 1.0) < 1e-10);
    CHECK(std::abs(report.dyg - 1.0) < 1e-10);
  }

  SUBCASE("||D_r f|| matches the dense-scan oracle (max near s = 0.85)") {
    // the sup over both shell sides: s in [0.8, 0.85] and [1.15, 1.2]
    const double oracle = std::max(dense_scan_drf(0.02, 0.8, 0.85),
                                   dense_scan_drf(0.02, 1.15, 1.2));
    CHECK(oracle == doctest::Approx(0.96).epsilon(1e-9));
    CHECK(report.drf == doctest::Approx(oracle).epsilon(1e-9));
  }

  SUBCASE("constants are assembled exactly from the reported norms") {
    CHECK(report.c == report.drf);
    CHECK(report.c_star ==
          report.drf * (1.0 + report.drg_hat) + report.dyf);
    CHECK(report.sigma == report.drf * (2.0 * report.drg_hat +
                                        report.dyg_hat) +
                              report.dyf * report.drg_hat);
    CHECK(report.cor_ix ==
          report.drf * report.drg_hat +
              (report.drf + report.dyf) * (1.0 + report.drg_hat));
    CHECK(report.c_star < 1.0);
    CHECK(report.c_star == doctest::Approx(0.96).epsilon(1e-9));
  }
}

TEST_CASE("||D_r f|| = 1 at r = 0 for mu = 0 over the full tube") {
  auto fam = canonical2();
  auto mesh = geometry::build_mesh(fam.manifold, 32);
  const TubularRegion tube{0.2, 0.0, TubularRegion::Side::Both};
  const auto report = estimate_norms(fam, 0.0, tube, *mesh, 64);
  CHECK(report.drf == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("monotone refinement: finer grids never lower a sampled sup") {
  auto fam = canonical2();
  auto mesh = geometry::build_mesh(fam.manifold, 32);
  for (double mu : {-0.02, 0.02}) {
    for (auto region :
         {TubularRegion{0.2, 0.0, TubularRegion::Side::Both},
          TubularRegion{0.2, 0.15, TubularRegion::Side::Both},
          TubularRegion{0.2, 0.05, TubularRegion::Side::Outer}}) {
      for (int n : {9, 17, 33}) {
        const auto coarse = estimate_norms(fam, mu, region, *mesh, n);
        const auto fine = estimate_norms(fam, mu, region, *mesh, 2 * n - 1);
        CHECK(fine.drf >= coarse.drf - 1e-15);
        CHECK(fine.dyf >= coarse.dyf - 1e-15);
        CHECK(fine.drg_hat >= coarse.drg_hat - 1e-15);
        CHECK(fine.dyg_hat >= coarse.dyg_hat - 1e-15);
        CHECK(fine.delta_drf >= -1e-15);  // vs its own half grid
      }
    }
  }
}

TEST_CASE("threaded norm sampling is identical to serial") {
  auto fam = canonical2();
  auto mesh = geometry::build_mesh(fam.manifold, 32);
  const TubularRegion shell{0.2, 0.1, TubularRegion::Side::Both};
  const auto serial = estimate_norms(fam, 0.02, shell, *mesh, 33, 1);
  const auto threaded = estimate_norms(fam, 0.02, shell, *mesh, 33, 4);
  CHECK(serial.drf == threaded.drf);
  CHECK(serial.c_star == threaded.c_star);
  CHECK(serial.delta_drf == threaded.delta_drf);
}

TEST_CASE("combined estimate (ix) with implication cross-check") {
  SUBCASE("canonical report: cor_ix = ||D_r f|| < 1") {
    auto fam = canonical2();
    auto mesh = geometry::build_mesh(fam.manifold, 32);
    const TubularRegion shell{0.2, 0.15, TubularRegion::Side::Both};
    const auto report = estimate_norms(fam, 0.02, shell, *mesh, 33);
    const auto verdict = check_combined_estimate(report);
    CHECK(verdict.holds);
    CHECK(verdict.margin == doctest::Approx(0.04).epsilon(1e-6));
    CHECK(verdict.implication_consistent);
  }

  SUBCASE("arithmetic assembly example") {
    const auto report = synthetic_report(0.5, 0.3, 0.5, 0.0);
    CHECK(report.cor_ix == doctest::Approx(1.45));
    CHECK(!check_combined_estimate(report).holds);
  }

  SUBCASE("degenerate all-zero report") {
    const auto report = synthetic_report(0.0, 0.0, 0.0, 0.0);
    CHECK(report.cor_ix == 0.0);
    CHECK(check_combined_estimate(report).holds);
  }

  SUBCASE("the implication can fail when ||D_y g^|| is large") {
    // (ix) silently assumes a bounded inverse tangential block; the
    // cross-check reports the inconsistency instead of hiding it
    const auto report = synthetic_report(0.3, 0.0, 0.0, 5.0);
    const auto verdict = check_combined_estimate(report);
    CHECK(verdict.holds);
    CHECK(!verdict.implies_vii);
    CHECK(!verdict.implication_consistent);
  }
}

TEST_CASE("map conditions on the canonical family") {
  auto fam = canonical2();
  auto mesh = geometry::build_mesh(fam.manifold, 64);
  CheckConfig cfg;

  SUBCASE("mu < 0: the tube attracts, sup |D_r f| < 1") {
    for (double mu : {-0.04, -0.02}) {
      const auto verdicts = check_map_conditions(fam, {mu}, *mesh, cfg);
      const auto* attracts = verdicts[0].find(Condition::AttractsBelow);
      REQUIRE(attracts != nullptr);
      CHECK(attracts->holds);
      CHECK(attracts->margin > 0.0);
    }
    // frozen sup at mu = -1/50 (interior max near r = -0.00676)
    const auto verdicts = check_map_conditions(fam, {-0.02}, *mesh, cfg);
    CHECK(verdicts[0].find(Condition::AttractsBelow)->witness_value ==
          doctest::Approx(0.9801345).epsilon(1e-4));
  }

  SUBCASE("mu = 1/50: repulsion, shell contraction and the constants hold") {
    const auto verdicts = check_map_conditions(fam, {0.02}, *mesh, cfg);
    const auto& v = verdicts[0];
    CHECK(v.find(Condition::SideBehavior)->holds);
    const auto* repels = v.find(Condition::RepelsOnManifold);
    CHECK(repels->holds);
    CHECK(repels->witness_value == doctest::Approx(1.02).epsilon(1e-13));
    CHECK(v.find(Condition::ShellContraction)->holds);
    CHECK(v.find(Condition::GraphContraction)->holds);
    CHECK(v.find(Condition::LipschitzProduct)->holds);
    CHECK(v.find(Condition::OscillationBound)->holds);
  }

  SUBCASE("mu = 1/50: the constant shell {0.15 <= d <= 0.2} is NOT forward-"
          "invariant (the branch sits below it at sqrt(1/50) ~ 0.1414)") {
    const auto verdicts = check_map_conditions(fam, {0.02}, *mesh, cfg);
    const auto* shell = verdicts[0].find(Condition::ShellInvariance);
    REQUIRE(shell != nullptr);
    CHECK(!shell->holds);
    CHECK(shell->witness_r == doctest::Approx(0.15));
    // 1.15 * sigma_{0.02}(1.15) - 1 = 0.14956875 exactly
    CHECK(shell->witness_value ==
          doctest::Approx(0.14956875).epsilon(1e-12));
    CHECK(shell->margin == doctest::Approx(-4.3125e-4).epsilon(1e-9));
    CHECK(!verdicts[0].overall);
  }

  SUBCASE("mu = 1/25: every condition holds, including shell invariance") {
    const auto verdicts = check_map_conditions(fam, {0.04}, *mesh, cfg);
    CHECK(verdicts[0].overall);
    const auto* shell = verdicts[0].find(Condition::ShellInvariance);
    CHECK(shell->holds);
  }

  SUBCASE("requesting (iii) below the threshold fails as expected") {
    cfg.requested = {Condition::RepelsOnManifold};
    const auto verdicts = check_map_conditions(fam, {-0.02}, *mesh, cfg);
    CHECK(!verdicts[0].overall);
    CHECK(verdicts[0].find(Condition::RepelsOnManifold)->margin ==
          doctest::Approx(-0.02).epsilon(1e-12));
  }

  SUBCASE("mu outside the declared range is rejected") {
    CHECK_THROWS_AS(check_map_conditions(fam, {0.2}, *mesh, cfg), Error);
  }
}

TEST_CASE("mu* bracketing") {
  auto fam = canonical2();

  SUBCASE("canonical family: bracket of width <= 1e-10 around 0") {
    for (int resolution : {32, 64, 256}) {
      auto mesh = geometry::build_mesh(fam.manifold, resolution);
      const auto bracket = find_mu_star(fam, *mesh, -0.04, 0.04);
      CHECK(bracket.width() <= 1e-10);
      CHECK(bracket.lo <= 0.0);
      CHECK(bracket.hi >= 0.0);
    }
  }

  SUBCASE("no crossing on a one-sided interval") {
    auto mesh = geometry::build_mesh(fam.manifold, 32);
    CHECK_THROWS_AS(find_mu_star(fam, *mesh, 0.01, 0.04), NoCrossing);
  }

  SUBCASE("synthetic linear family crosses at 0.3") {
    MapFamily linear;
    linear.name = "linear-slope";
    linear.manifold = geometry::make_unit_circle();
    linear.mu_range = dynsys::MuRange{1.0};
    dynsys::RadialRotationModel model;
    model.q = [](double s, double mu) {
      return 1.0 + (s - 1.0) * (0.7 + mu);
    };
    model.dq = [](double, double mu) { return 0.7 + mu; };
    model.q_inverse = [](double rho, double mu) {
      return 1.0 + (rho - 1.0) / (0.7 + mu);
    };
    model.rotation = Mat::Identity(2, 2);
    linear.model = std::move(model);
    linear.forward = [](const Vec& x, double mu) {
      const double rho = x.norm();
      return Vec(x * ((1.0 + (rho - 1.0) * (0.7 + mu)) / rho));
    };
    auto mesh = geometry::build_mesh(linear.manifold, 16);
    const auto bracket = find_mu_star(linear, *mesh, 0.0, 0.5);
    CHECK(bracket.lo <= 0.3);
    CHECK(bracket.hi >= 0.3 - 1e-10);
    CHECK(bracket.width() <= 1e-10);
  }
}

TEST_CASE("default inner cut: continuous ramp capped at alpha1") {
  CHECK(default_inner_cut(0.0, 0.0, 0.04, 0.15) == 0.0);
  CHECK(default_inner_cut(0.01, 0.0, 0.04, 0.15) == doctest::Approx(0.15));
  CHECK(default_inner_cut(0.04, 0.0, 0.04, 0.15) == doctest::Approx(0.15));
  CHECK(default_inner_cut(0.005, 0.0, 0.04, 0.15) ==
        doctest::Approx(0.075));
  CHECK(default_inner_cut(-0.01, 0.0, 0.04, 0.15) == 0.0);
  // continuity across the ramp
  double prev = default_inner_cut(-0.001, 0.0, 0.04, 0.15);
  for (double mu = -0.001; mu <= 0.04; mu += 1e-4) {
    const double cur = default_inner_cut(mu, 0.0, 0.04, 0.15);
    CHECK(std::abs(cur - prev) < 0.002);
    prev = cur;
  }
}

TEST_CASE("basin drive condition (x)") {
  auto fam = canonical2();
  auto mesh = geometry::build_mesh(fam.manifold, 32);

  SUBCASE("frozen values at r = +-0.05, mu = 1/50") {
    const Vec y = mesh->nodes[3];
    CHECK(fam.f_component(0.05, y, 0.02) ==
          doctest::Approx(0.05091875).epsilon(1e-13));
    CHECK(fam.f_component(-0.05, y, 0.02) ==
          doctest::Approx(-0.05083125).epsilon(1e-13));
  }

  SUBCASE("holds past the threshold, fails before it") {
    const auto past = check_basin_condition(fam, 0.02, 0.1, *mesh, 32, false);
    CHECK(past.holds);
    CHECK(past.margin > 0.0);
    const auto before =
        check_basin_condition(fam, -0.02, 0.1, *mesh, 32, false);
    CHECK(!before.holds);
  }

  SUBCASE("side-reversing: outward drive with flipped signs") {
    auto wrapped = dynsys::side_reversing_wrap(fam);
    const auto verdict =
        check_basin_condition(wrapped, 0.02, 0.1, *mesh, 32, true);
    CHECK(verdict.holds);
    const auto wrong_expectation =
        check_basin_condition(wrapped, 0.02, 0.1, *mesh, 32, false);
    CHECK(!wrong_expectation.holds);
  }
}

TEST_CASE("condition labels round-trip") {
  for (auto condition :
       {Condition::SideBehavior, Condition::AttractsBelow,
        Condition::RepelsOnManifold, Condition::ShellContraction,
        Condition::ShellInvariance, Condition::GraphContraction,
        Condition::LipschitzProduct, Condition::OscillationBound,
        Condition::CombinedEstimate, Condition::BasinDrive}) {
    CHECK(condition_from_label(roman_label(condition)) == condition);
    CHECK(condition_from_label(condition_name(condition)) == condition);
  }
  CHECK(!condition_from_label("xv").has_value());
}
