#include "pitchfork/flow.hpp"

#include <cmath>

namespace pitchfork::flow {

namespace {

using geometry::TubularPoint;
using geometry::TubularRegion;

/// One RK4 step of dx/dt = f(x).
template <typename F>
Vec rk4_step(const F& f, const Vec& x, double h) {
  const Vec k1 = f(x);
  const Vec k2 = f(x + 0.5 * h * k1);
  const Vec k3 = f(x + 0.5 * h * k2);
  const Vec k4 = f(x + h * k3);
  return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <typename F>
Vec integrate(const F& f, Vec x, double t, double h,
              const std::function<void(double, const Vec&)>& observe) {
  const double dir = t >= 0.0 ? 1.0 : -1.0;
  double done = 0.0;
  const double total = std::abs(t);
  if (observe) observe(0.0, x);
  while (done < total) {
    const double step = std::min(h, total - done);
    x = rk4_step(f, x, dir * step);
    done += step;
    if (observe) observe(dir * done, x);
  }
  return x;
}

Mat rotation_generator(int dim) {
  Mat gen = Mat::Zero(dim, dim);
  gen(0, 1) = -1.0;
  gen(1, 0) = 1.0;
  return gen;
}

}  // namespace

Mat VectorFieldFamily::jacobian_at(const Vec& x, double mu) const {
  if (jacobian) return (*jacobian)(x, mu);
  const int m = static_cast<int>(x.size());
  Mat j(m, m);
  for (int i = 0; i < m; ++i) {
    Vec xp = x, xm = x;
    xp(i) += fd_step;
    xm(i) -= fd_step;
    j.col(i) = (eval(xp, mu) - eval(xm, mu)) / (2.0 * fd_step);
  }
  return j;
}

VectorFieldFamily::Rates VectorFieldFamily::components(
    const TubularPoint& p, double mu) const {
  const auto& man = *manifold;
  const Vec x = man.embed(p);
  const Vec velocity = eval(x, mu);
  const Vec n = man.outward_normal(p.y);
  const Mat frame = man.tangent_frame(p.y);
  Rates rates;
  rates.R = n.dot(velocity);
  const double scale = man.radial_metric_scale(p.r).value_or(1.0 + p.r);
  rates.Y = frame.transpose() * velocity / scale;
  return rates;
}

VectorFieldFamily::RateBlocks VectorFieldFamily::rate_blocks(
    const TubularPoint& p, double mu) const {
  const auto& man = *manifold;
  const int k = man.intrinsic_dim();
  const double h = fd_step;
  RateBlocks blocks;
  const Rates base = components(p, mu);
  blocks.R = base.R;
  blocks.Y = base.Y;

  const Rates rp = components({p.r + h, p.y}, mu);
  const Rates rm = components({p.r - h, p.y}, mu);
  blocks.DrR = (rp.R - rm.R) / (2.0 * h);
  blocks.DrY = (rp.Y - rm.Y) / (2.0 * h);

  blocks.DyR.resize(k);
  blocks.DyY.resize(k, k);
  const Mat frame = man.tangent_frame(p.y);
  for (int j = 0; j < k; ++j) {
    const Vec yp = man.step_on_manifold(p.y, h * frame.col(j));
    const Vec ym = man.step_on_manifold(p.y, -h * frame.col(j));
    const double denom = (yp - ym).norm();
    const Rates fp = components({p.r, yp}, mu);
    const Rates fm = components({p.r, ym}, mu);
    blocks.DyR(j) = (fp.R - fm.R) / denom;
    blocks.DyY.col(j) = (fp.Y - fm.Y) / denom;
  }
  return blocks;
}

VectorFieldFamily model_field(int ambient_dim) {
  if (ambient_dim != 2 && ambient_dim != 3)
    throw UnsupportedManifold("model_field: ambient dim must be 2 or 3");
  VectorFieldFamily field;
  field.name = "flow-model";
  field.manifold = ambient_dim == 2 ? geometry::make_unit_circle()
                                    : geometry::make_unit_sphere();
  const Mat gen = rotation_generator(ambient_dim);
  field.eval = [gen](const Vec& x, double mu) {
    const double rho = x.norm();
    const double rr = rho - 1.0;
    const Vec xhat = x / rho;
    return Vec((mu * rr - rr * rr * rr) * xhat + gen * x);
  };
  field.jacobian = [gen](const Vec& x, double mu) {
    const double rho = x.norm();
    const double rr = rho - 1.0;
    const Vec xhat = x / rho;
    const int m = static_cast<int>(x.size());
    const Mat proj = Mat::Identity(m, m) - xhat * xhat.transpose();
    return Mat(xhat * (mu - 3.0 * rr * rr) * xhat.transpose() +
               (mu * rr - rr * rr * rr) / rho * proj + gen);
  };
  return field;
}

Vec integrate_flow(const VectorFieldFamily& X, const Vec& x0, double mu,
                   double t, const StepControl& sc,
                   std::optional<double> tube_guard) {
  auto f = [&](const Vec& x) { return X.eval(x, mu); };
  std::function<void(double, const Vec&)> observe;
  if (tube_guard) {
    observe = [&](double tau, const Vec& x) {
      if (std::abs(X.manifold->project(x).r) > *tube_guard + 1e-12)
        throw LeftTube("trajectory left N(" + std::to_string(*tube_guard) +
                       ") at t=" + std::to_string(tau));
    };
  }
  return integrate(f, x0, t, sc.h, observe);
}

std::vector<std::pair<double, Vec>> integrate_path(const VectorFieldFamily& X,
                                                   const Vec& x0, double mu,
                                                   double t,
                                                   const StepControl& sc) {
  std::vector<std::pair<double, Vec>> path;
  auto f = [&](const Vec& x) { return X.eval(x, mu); };
  integrate(f, x0, t, sc.h,
            [&](double tau, const Vec& x) { path.emplace_back(tau, x); });
  return path;
}

double richardson_error(const VectorFieldFamily& X, const Vec& x0, double mu,
                        double t, const StepControl& sc) {
  const Vec coarse = integrate_flow(X, x0, mu, t, sc);
  const Vec fine = integrate_flow(X, x0, mu, t, {sc.h / 2.0});
  return (coarse - fine).norm();
}

Mat variational_jacobian(const VectorFieldFamily& X, double mu, const Vec& x0,
                         double t, const StepControl& sc) {
  const int m = static_cast<int>(x0.size());
  // augmented state [x | Phi columns]
  Vec state(m + m * m);
  state.head(m) = x0;
  Mat eye = Mat::Identity(m, m);
  for (int c = 0; c < m; ++c) state.segment(m + c * m, m) = eye.col(c);
  auto f = [&](const Vec& s) {
    const Vec x = s.head(m);
    const Mat jac = X.jacobian_at(x, mu);
    Vec ds(m + m * m);
    ds.head(m) = X.eval(x, mu);
    for (int c = 0; c < m; ++c)
      ds.segment(m + c * m, m) = jac * s.segment(m + c * m, m);
    return ds;
  };
  const Vec out = integrate(f, state, t, sc.h, nullptr);
  Mat phi(m, m);
  for (int c = 0; c < m; ++c) phi.col(c) = out.segment(m + c * m, m);
  return phi;
}

dynsys::MapFamily time_t_map(const VectorFieldFamily& X, double t,
                             const StepControl& sc) {
  dynsys::MapFamily map;
  map.name = X.name + "-time-" + std::to_string(t);
  map.manifold = X.manifold;
  map.mu_range = X.mu_range;
  const VectorFieldFamily field = X;
  const StepControl step = sc;
  map.forward = [field, step, t](const Vec& x, double mu) {
    return integrate_flow(field, x, mu, t, step);
  };
  map.inverse = [field, step, t](const Vec& x, double mu) {
    return integrate_flow(field, x, mu, -t, step);
  };
  map.jacobian = [field, step, t](const Vec& x, double mu) {
    return variational_jacobian(field, mu, x, t, step);
  };
  map.inverse_jacobian = [field, step, t](const Vec& x, double mu) {
    return variational_jacobian(field, mu, x, -t, step);
  };
  return map;
}

const char* flow_condition_label(FlowCondition c) {
  switch (c) {
    case FlowCondition::PointsInward: return "i";
    case FlowCondition::AttractsBelow: return "ii";
    case FlowCondition::RepelsOnM: return "iii";
    case FlowCondition::ShellDecay: return "iv";
    case FlowCondition::ComparisonBounds: return "v";
  }
  return "?";
}

std::vector<FlowVerdict> check_flow_conditions(
    const VectorFieldFamily& X, const std::vector<double>& mu_grid,
    const geometry::ManifoldMesh& mesh, const FlowCheckConfig& cfg) {
  std::vector<FlowVerdict> out;
  for (double mu : mu_grid) {
    FlowVerdict verdict;
    verdict.mu = mu;

    // (i) inward pointing on the tube boundary
    {
      FlowConditionVerdict v;
      v.condition = FlowCondition::PointsInward;
      double worst = 1e300;
      for (const auto& y : mesh.nodes) {
        const double outer = -X.components({cfg.alpha, y}, mu).R;
        const double inner = X.components({-cfg.alpha, y}, mu).R;
        worst = std::min({worst, outer, inner});
      }
      v.margin = worst;
      v.holds = worst > 0.0;
      v.detail = "min inward rate on the boundary = " + std::to_string(worst);
      verdict.conditions.push_back(std::move(v));
    }

    if (mu < 0.0) {
      FlowConditionVerdict v;
      v.condition = FlowCondition::AttractsBelow;
      double worst = -1e300;
      const TubularRegion tube{cfg.alpha, 0.0, TubularRegion::Side::Both};
      for (double r : hypotheses::radial_grid(tube, cfg.radial))
        for (const auto& y : mesh.nodes)
          worst = std::max(worst, X.rate_blocks({r, y}, mu).DrR);
      v.margin = -worst;
      v.holds = worst < 0.0;
      v.detail = "sup D_r R = " + std::to_string(worst);
      verdict.conditions.push_back(std::move(v));
    }

    if (mu > cfg.mu_star) {
      {
        FlowConditionVerdict v;
        v.condition = FlowCondition::RepelsOnM;
        double worst = 1e300;
        for (const auto& y : mesh.nodes)
          worst = std::min(worst, X.rate_blocks({0.0, y}, mu).DrR);
        v.margin = worst;
        v.holds = worst > 0.0;
        v.detail = "inf D_r R on M = " + std::to_string(worst);
        verdict.conditions.push_back(std::move(v));
      }

      // (iv) shell decay: field enters A on both boundaries, D_r R <= -2s
      double sup_drr = -1e300;
      {
        FlowConditionVerdict v;
        v.condition = FlowCondition::ShellDecay;
        double worst_boundary = 1e300;
        for (const auto& y : mesh.nodes) {
          worst_boundary = std::min(
              {worst_boundary, -X.components({cfg.alpha, y}, mu).R,
               X.components({cfg.alpha1, y}, mu).R,
               -X.components({-cfg.alpha1, y}, mu).R,
               X.components({-cfg.alpha, y}, mu).R});
        }
        const TubularRegion shell{cfg.alpha, cfg.alpha1,
                                  TubularRegion::Side::Both};
        for (double r : hypotheses::radial_grid(shell, cfg.radial))
          for (const auto& y : mesh.nodes)
            sup_drr = std::max(sup_drr, X.rate_blocks({r, y}, mu).DrR);
        v.holds = worst_boundary > 0.0 && sup_drr < 0.0;
        v.margin = std::min(worst_boundary, -sup_drr);
        v.detail = "boundary inflow margin " + std::to_string(worst_boundary) +
                   ", sup D_r R on A = " + std::to_string(sup_drr);
        verdict.conditions.push_back(std::move(v));
      }

      // (v) fitted comparison parameters and the E-bound inequalities
      {
        FlowConditionVerdict v;
        v.condition = FlowCondition::ComparisonBounds;
        GronwallParams fitted;
        fitted.s = sup_drr < 0.0 ? -sup_drr / 2.0 : 0.0;
        double sig = 0.0, nu = 0.0;
        const TubularRegion shell{cfg.alpha, cfg.alpha1,
                                  TubularRegion::Side::Both};
        for (double r : hypotheses::radial_grid(shell, cfg.radial)) {
          for (const auto& y : mesh.nodes) {
            const auto blocks = X.rate_blocks({r, y}, mu);
            sig = std::max({sig, blocks.DyR.norm(), blocks.DrY.norm()});
            nu = std::max(nu, spectral_norm(blocks.DyY));
          }
        }
        // FD dust: analytic zeros come back as O(h^2) noise
        if (sig < 1e-9) sig = 0.0;
        if (nu < 1e-9) nu = 0.0;
        fitted.sigma = sig;
        fitted.nu = nu;
        fitted.t_star = *std::max_element(cfg.t_values.begin(),
                                          cfg.t_values.end());
        verdict.fitted = fitted;
        const auto ineq = check_comparison_ineq(fitted);
        if (!ineq.ok) {
          v.holds = false;
          v.margin = -1.0;
          v.detail = "inequality violated: " + ineq.violated;
        } else {
          const GronwallBounds bounds(fitted);
          double worst = 1e300;
          for (double t : cfg.t_values) {
            const double e0 = bounds.bound(0, t), e1 = bounds.bound(1, t);
            const double e2m = bounds.bound(2, -t), e3m = bounds.bound(3, -t);
            const double est1 = 1.0 - (e0 * (1.0 + e2m) + e1);
            const double est2 = 1.0 - (e0 + e1) * (e2m + e3m);
            const double est3 =
                1.0 - (e0 * (2.0 * e2m + e3m) + e1 * e2m);
            worst = std::min({worst, est1, est2, est3});
          }
          v.margin = worst;
          v.holds = worst > 0.0;
          v.detail = "min E-bound margin over t = " + std::to_string(worst);
        }
        verdict.conditions.push_back(std::move(v));
      }
    }

    verdict.overall = std::all_of(verdict.conditions.begin(),
                                  verdict.conditions.end(),
                                  [](const auto& v) { return v.holds; });
    out.push_back(std::move(verdict));
  }
  return out;
}

double verify_invariance_across_t(
    const VectorFieldFamily& X, double mu,
    const std::vector<const graphtransform::GraphFunction*>& branches,
    const std::vector<double>& t_set, const StepControl& sc) {
  double worst = 0.0;
  for (const auto* graph : branches) {
    const auto& mesh = *graph->mesh();
    const auto& man = *mesh.manifold;
    for (int i = 0; i < mesh.node_count(); ++i) {
      const Vec x0 = man.embed({graph->values()(i), mesh.nodes[i]});
      for (double t : t_set) {
        const Vec xt = integrate_flow(X, x0, mu, t, sc);
        const auto p = man.project(xt);
        worst = std::max(worst, std::abs(p.r - graph->eval(p.y)));
      }
    }
  }
  return worst;
}

}  // namespace pitchfork::flow
