#include <cmath>
#include <random>

#include "doctest.h"
#include "pitchfork/flow.hpp"
#include "test_helpers.hpp"

using namespace pitchfork;
using namespace pitchfork::flow;
using pftest::vec2;
using pftest::vec3;

namespace {

/// Closed-form radial solution of r' = mu r - r^3:
/// r(t)^2 = mu / (1 + (mu/r0^2 - 1) exp(-2 mu t)).
double radial_oracle(double mu, double r0, double t) {
  const double denom = 1.0 + (mu / (r0 * r0) - 1.0) * std::exp(-2.0 * mu * t);
  return (r0 >= 0.0 ? 1.0 : -1.0) * std::sqrt(mu / denom);
}

Vec on_tube(double offset, double angle) {
  return (1.0 + offset) * vec2(std::cos(angle), std::sin(angle));
}

}  // namespace

TEST_CASE("flow integration follows the radial closed form") {
  auto field = model_field(2);

  SUBCASE("relaxation onto the branch circle") {
    const double mu = 0.02, r0 = 0.1;
    const Vec x0 = on_tube(r0, 0.3);
    for (double t : {5.0, 20.0, 50.0}) {
      const Vec xt = integrate_flow(field, x0, mu, t);
      CHECK(std::abs((xt.norm() - 1.0) - radial_oracle(mu, r0, t)) < 1e-9);
    }
    // the gap to sqrt(mu) at t = 50 is still ~8.7e-3; 1e-6 needs t ~ 280
    CHECK(std::abs((integrate_flow(field, x0, mu, 50.0).norm() - 1.0) -
                   std::sqrt(mu)) > 1e-3);
    CHECK(std::abs((integrate_flow(field, x0, mu, 300.0).norm() - 1.0) -
                   std::sqrt(mu)) < 1e-6);
  }

  SUBCASE("the unit circle is flow-invariant") {
    std::mt19937_64 rng(91);
    for (double t : {1.0, 5.0, 25.0}) {
      const Vec y0 = pftest::random_unit(rng, 2);
      CHECK(std::abs(integrate_flow(field, y0, 0.02, t).norm() - 1.0) <
            1e-10);
    }
  }

  SUBCASE("below the threshold every offset decays monotonically") {
    const double mu = -0.02;
    double prev = 0.1;
    for (double t : {1.0, 10.0, 50.0, 300.0}) {
      const double r =
          integrate_flow(field, on_tube(0.1, 0.0), mu, t).norm() - 1.0;
      CHECK(r < prev);
      CHECK(r > 0.0);
      prev = r;
    }
    CHECK(prev < 1e-3);  // ~0.1 exp(mu t) for large t
  }

  SUBCASE("group property") {
    const Vec x0 = on_tube(0.08, 1.2);
    const Vec both = integrate_flow(field, x0, 0.02, 1.7);
    const Vec split = integrate_flow(
        field, integrate_flow(field, x0, 0.02, 0.9), 0.02, 0.8);
    CHECK((both - split).norm() < 1e-12);
  }

  SUBCASE("tube guard raises LeftTube") {
    // outside the branch basin boundary, backward time blows the radius up
    auto grow = model_field(2);
    const Vec x0 = on_tube(0.15, 0.0);
    CHECK_THROWS_AS(
        integrate_flow(grow, x0, 0.02, -200.0, {}, std::optional<double>(0.2)),
        LeftTube);
  }

  SUBCASE("m = 3 variant leaves the sphere invariant") {
    auto field3 = model_field(3);
    std::mt19937_64 rng(93);
    const Vec y0 = pftest::random_unit(rng, 3);
    CHECK(std::abs(integrate_flow(field3, y0, 0.02, 3.0).norm() - 1.0) <
          1e-10);
  }
}

TEST_CASE("integrate_path dumps every step") {
  auto field = model_field(2);
  const auto path = integrate_path(field, on_tube(0.05, 0.0), 0.02, 0.01);
  REQUIRE(path.size() == 11);  // t = 0 plus 10 steps of 1e-3
  CHECK(path.front().first == 0.0);
  CHECK(path.back().first == doctest::Approx(0.01));
}

TEST_CASE("step-halving error estimate shrinks like h^4") {
  auto field = model_field(2);
  const Vec x0 = on_tube(0.1, 0.4);
  const double coarse = richardson_error(field, x0, 0.02, 1.0, {1e-2});
  const double fine = richardson_error(field, x0, 0.02, 1.0, {1e-3});
  CHECK(coarse < 1e-8);
  CHECK(fine < coarse / 100.0);  // fourth-order: 10^4 expected, 10^2 asserted
}

TEST_CASE("variational Jacobians") {
  SUBCASE("linear field: matrix exponential") {
    VectorFieldFamily linear;
    linear.manifold = geometry::make_unit_circle();
    Mat b = Mat::Zero(2, 2);
    b(0, 0) = -2.0;
    b(1, 1) = 0.1;
    linear.eval = [b](const Vec& x, double) { return Vec(b * x); };
    linear.jacobian = [b](const Vec&, double) { return b; };
    const Mat phi = variational_jacobian(linear, 0.0, vec2(1.0, 1.0), 1.0);
    CHECK(phi(0, 0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-10));
    CHECK(phi(1, 1) == doctest::Approx(std::exp(0.1)).epsilon(1e-10));
    CHECK(std::abs(phi(0, 1)) < 1e-12);
    CHECK(std::abs(phi(1, 0)) < 1e-12);
  }

  SUBCASE("t = 0 is the identity") {
    auto field = model_field(2);
    const Mat phi = variational_jacobian(field, 0.02, on_tube(0.1, 0.4), 0.0);
    CHECK((phi - Mat::Identity(2, 2)).norm() < 1e-14);
  }

  SUBCASE("radial entry on M is exp(mu t)") {
    auto field = model_field(2);
    const Vec y0 = vec2(std::cos(0.7), std::sin(0.7));
    const Mat phi = variational_jacobian(field, 0.02, y0, 1.0);
    const Vec xt = integrate_flow(field, y0, 0.02, 1.0);
    const Vec n_out = xt / xt.norm();
    CHECK(n_out.dot(phi * y0) == doctest::Approx(std::exp(0.02)).epsilon(1e-9));
  }

  SUBCASE("agrees with finite differences of the flow map") {
    auto field = model_field(2);
    const Vec x0 = on_tube(0.07, 0.9);
    const double mu = 0.02, t = 1.0;
    const Mat phi = variational_jacobian(field, mu, x0, t);
    const double h = 1e-6;
    for (int j = 0; j < 2; ++j) {
      Vec xp = x0, xm = x0;
      xp(j) += h;
      xm(j) -= h;
      const Vec column = (integrate_flow(field, xp, mu, t) -
                          integrate_flow(field, xm, mu, t)) /
                         (2.0 * h);
      CHECK((column - phi.col(j)).norm() <
            1e-6 * std::max(1.0, phi.col(j).norm()));
    }
  }
}

TEST_CASE("time-t maps plug into the discrete pipeline") {
  auto field = model_field(2);
  auto map1 = time_t_map(field, 1.0);
  const Vec y = vec2(std::cos(0.2), std::sin(0.2));

  SUBCASE("D_r f(0, .) = exp(mu t)") {
    const auto ev = dynsys::split_components(map1, {0.0, y}, 0.02, 0.3);
    CHECK(ev.Drf == doctest::Approx(std::exp(0.02)).epsilon(1e-9));
    const auto ev_neg = dynsys::split_components(map1, {0.0, y}, -0.02, 0.3);
    CHECK(ev_neg.Drf == doctest::Approx(std::exp(-0.02)).epsilon(1e-9));
  }

  SUBCASE("composition equals the doubled horizon") {
    auto map2 = time_t_map(field, 2.0);
    const Vec x0 = on_tube(0.12, 0.5);
    const Vec twice = map1.apply(map1.apply(x0, 0.02), 0.02);
    CHECK((twice - map2.apply(x0, 0.02)).norm() < 1e-12);
  }

  SUBCASE("the backward map inverts the forward map") {
    const Vec x0 = on_tube(0.1, 1.0);
    const Vec round_trip = map1.apply_inverse(map1.apply(x0, 0.02), 0.02);
    CHECK((round_trip - x0).norm() < 1e-9);
  }
}

TEST_CASE("rate components and blocks of the model field") {
  auto field = model_field(2);
  const Vec y = vec2(std::cos(1.3), std::sin(1.3));

  SUBCASE("R(r) = mu r - r^3 and unit tangential speed") {
    for (double r : {-0.15, 0.0, 0.1}) {
      const auto rates = field.components({r, y}, 0.02);
      CHECK(rates.R == doctest::Approx(0.02 * r - r * r * r).epsilon(1e-12));
      CHECK(rates.Y.norm() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  SUBCASE("the normal rate vanishes on M (invariance)") {
    auto mesh = geometry::build_mesh(field.manifold, 32);
    for (const auto& node : mesh->nodes)
      CHECK(std::abs(field.components({0.0, node}, 0.02).R) < 1e-13);
  }

  SUBCASE("derivative blocks: D_r R = mu - 3 r^2, everything else flat") {
    for (double r : {-0.15, 0.1}) {
      const auto blocks = field.rate_blocks({r, y}, 0.02);
      CHECK(blocks.DrR ==
            doctest::Approx(0.02 - 3.0 * r * r).epsilon(1e-7));
      CHECK(blocks.DyR.norm() < 1e-8);
      CHECK(blocks.DrY.norm() < 1e-8);
      CHECK(spectral_norm(blocks.DyY) < 1e-8);
    }
  }
}

TEST_CASE("flow conditions on the model field") {
  auto field = model_field(2);
  auto mesh = geometry::build_mesh(field.manifold, 32);
  FlowCheckConfig cfg;
  cfg.alpha = 0.2;
  cfg.alpha1 = 0.1;

  SUBCASE("mu < 0: inward pointing and globally decaying") {
    const auto verdicts = check_flow_conditions(field, {-0.02}, *mesh, cfg);
    REQUIRE(verdicts.size() == 1);
    CHECK(verdicts[0].overall);
    for (const auto& c : verdicts[0].conditions) CHECK(c.holds);
  }

  SUBCASE("mu = 0.02: repulsion on M, shell decay with fitted s = 0.005") {
    const auto verdicts = check_flow_conditions(field, {0.02}, *mesh, cfg);
    REQUIRE(verdicts.size() == 1);
    const auto& v = verdicts[0];
    CHECK(v.overall);
    CHECK(v.fitted.s == doctest::Approx(0.005).epsilon(1e-4));
    CHECK(v.fitted.sigma == 0.0);
    CHECK(v.fitted.nu == 0.0);
    for (const auto& c : v.conditions) {
      CHECK(c.holds);
      CHECK(c.margin > 0.0);
    }
  }
}

TEST_CASE("variational blocks are dominated by the comparison bounds") {
  // fitted parameters for the shell A = {0.1 <= d <= 0.2} at mu = 0.02
  auto field = model_field(2);
  const GronwallParams params{0.005, 0.0, 0.0, 2.0};
  const GronwallBounds bounds = gronwall_bounds(params);
  std::mt19937_64 rng(97);
  std::uniform_real_distribution<double> offsets(0.1, 0.2);
  std::uniform_real_distribution<double> angles(0.0, 2.0 * M_PI);
  for (double t : {1.0, 1.5, 2.0}) {
    auto map_t = time_t_map(field, t);
    for (int trial = 0; trial < 6; ++trial) {
      const double sign = trial % 2 == 0 ? 1.0 : -1.0;
      const Vec y = vec2(std::cos(angles(rng)), std::sin(angles(rng)));
      const auto ev =
          dynsys::split_components(map_t, {sign * offsets(rng), y}, 0.02, 0.5);
      CHECK(std::abs(ev.Drf) <= bounds.E(0, t) + 1e-8);
      CHECK(ev.Dyf.norm() <= bounds.E(1, t) + 1e-8);
      CHECK(ev.Drg.norm() <= bounds.E(2, t) + 1e-8);
      CHECK(spectral_norm(ev.Dyg) <= bounds.E(3, t) + 1e-8);
    }
  }
}

TEST_CASE("manifolds computed at t = 1 are invariant for every t") {
  auto field = model_field(2);
  auto mesh = geometry::build_mesh(field.manifold, 64);
  const double mu = 0.02;
  const double root = std::sqrt(mu);

  SUBCASE("the exact branch stays put") {
    const graphtransform::GraphFunction branch =
        graphtransform::GraphFunction::constant(mesh, root);
    const double deviation = verify_invariance_across_t(
        field, mu, {&branch}, {0.37, 1.0, 1.5, 2.0});
    CHECK(deviation < 1e-8);
  }

  SUBCASE("t = 0 transports nothing") {
    const graphtransform::GraphFunction branch =
        graphtransform::GraphFunction::constant(mesh, root);
    CHECK(verify_invariance_across_t(field, mu, {&branch}, {0.0}) < 1e-14);
  }

  SUBCASE("a perturbed graph drifts, and the drift grows with t") {
    const graphtransform::GraphFunction off =
        graphtransform::GraphFunction::constant(mesh, root + 0.01);
    double prev = 0.0;
    for (double t : {0.37, 1.0, 2.0}) {
      const double deviation =
          verify_invariance_across_t(field, mu, {&off}, {t});
      CHECK(deviation > prev);
      prev = deviation;
    }
    CHECK(prev > 1e-4);
  }
}
