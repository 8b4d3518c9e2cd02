#include "pitchfork/hypotheses.hpp"

#include <algorithm>
#include <cmath>

#include "pitchfork/parallel.hpp"

namespace pitchfork::hypotheses {

namespace {

using dynsys::ComponentEval;
using dynsys::MapFamily;
using geometry::ManifoldMesh;
using geometry::TubularPoint;
using geometry::TubularRegion;

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i)
    out[i] = lo + (hi - lo) * (n == 1 ? 0.0 : double(i) / (n - 1));
  return out;
}

struct NormAccumulator {
  double drf = 0, dyf = 0, drg_hat = 0, dyg_hat = 0, dyg = 0, drg = 0;

  void absorb(const ComponentEval& fwd, const ComponentEval& inv) {
    drf = std::max(drf, std::abs(fwd.Drf));
    dyf = std::max(dyf, fwd.Dyf.norm());
    dyg = std::max(dyg, spectral_norm(fwd.Dyg));
    drg = std::max(drg, fwd.Drg.norm());
    drg_hat = std::max(drg_hat, inv.Drg.norm());
    dyg_hat = std::max(dyg_hat, spectral_norm(inv.Dyg));
  }

  void merge(const NormAccumulator& other) {
    drf = std::max(drf, other.drf);
    dyf = std::max(dyf, other.dyf);
    dyg = std::max(dyg, other.dyg);
    drg = std::max(drg, other.drg);
    drg_hat = std::max(drg_hat, other.drg_hat);
    dyg_hat = std::max(dyg_hat, other.dyg_hat);
  }
};

void assemble_constants(NormReport& r) {
  r.c = r.drf;
  r.c_star = r.drf * (1.0 + r.drg_hat) + r.dyf;
  r.sigma = r.drf * (2.0 * r.drg_hat + r.dyg_hat) + r.dyf * r.drg_hat;
  r.cor_ix = r.drf * r.drg_hat + (r.drf + r.dyf) * (1.0 + r.drg_hat);
}

}  // namespace

std::vector<double> radial_grid(const TubularRegion& region, int n) {
  region.validate();
  std::vector<double> rs;
  if (region.inner_cut == 0.0 && region.side == TubularRegion::Side::Both) {
    // single span through r = 0, odd count so 0 is a sample
    rs = linspace(-region.alpha, region.alpha, 2 * n - 1);
    return rs;
  }
  if (region.side != TubularRegion::Side::Inner) {
    const auto outer = linspace(region.inner_cut, region.alpha, n);
    rs.insert(rs.end(), outer.begin(), outer.end());
  }
  if (region.side != TubularRegion::Side::Outer) {
    const auto inner = linspace(-region.alpha, -region.inner_cut, n);
    rs.insert(rs.end(), inner.begin(), inner.end());
  }
  return rs;
}

NormReport estimate_norms(const MapFamily& F, double mu,
                          const TubularRegion& region,
                          const ManifoldMesh& mesh, int radial, int threads) {
  NormReport report;
  report.region = region;
  report.mu = mu;
  report.grid_radial = radial;
  report.grid_mesh = mesh.node_count();

  const auto rs = radial_grid(region, radial);
  std::vector<NormAccumulator> per_radius(rs.size());
  parallel_for(static_cast<int>(rs.size()), threads, [&](int ri) {
    for (const auto& y : mesh.nodes) {
      const TubularPoint p{rs[ri], y};
      const ComponentEval fwd = dynsys::split_components(F, p, mu, region.alpha);
      const ComponentEval inv = dynsys::inverse_components(F, p, mu, region.alpha);
      per_radius[ri].absorb(fwd, inv);
    }
  });
  NormAccumulator fine, coarse;
  for (size_t ri = 0; ri < per_radius.size(); ++ri) {
    fine.merge(per_radius[ri]);
    if (ri % 2 == 0) coarse.merge(per_radius[ri]);
  }
  report.drf = fine.drf;
  report.dyf = fine.dyf;
  report.drg_hat = fine.drg_hat;
  report.dyg_hat = fine.dyg_hat;
  report.dyg = fine.dyg;
  report.drg = fine.drg;
  report.delta_drf = fine.drf - coarse.drf;
  report.delta_dyf = fine.dyf - coarse.dyf;
  report.delta_drg_hat = fine.drg_hat - coarse.drg_hat;
  report.delta_dyg_hat = fine.dyg_hat - coarse.dyg_hat;
  assemble_constants(report);
  return report;
}

const char* roman_label(Condition c) {
  switch (c) {
    case Condition::SideBehavior: return "i";
    case Condition::AttractsBelow: return "ii";
    case Condition::RepelsOnManifold: return "iii";
    case Condition::ShellContraction: return "iv";
    case Condition::ShellInvariance: return "v";
    case Condition::GraphContraction: return "vi";
    case Condition::LipschitzProduct: return "vii";
    case Condition::OscillationBound: return "viii";
    case Condition::CombinedEstimate: return "ix";
    case Condition::BasinDrive: return "x";
  }
  return "?";
}

const char* condition_name(Condition c) {
  switch (c) {
    case Condition::SideBehavior: return "side_behavior";
    case Condition::AttractsBelow: return "attracts_below_threshold";
    case Condition::RepelsOnManifold: return "repels_on_manifold";
    case Condition::ShellContraction: return "shell_contraction";
    case Condition::ShellInvariance: return "shell_invariance";
    case Condition::GraphContraction: return "graph_contraction";
    case Condition::LipschitzProduct: return "lipschitz_product";
    case Condition::OscillationBound: return "oscillation_bound";
    case Condition::CombinedEstimate: return "combined_estimate";
    case Condition::BasinDrive: return "basin_drive";
  }
  return "?";
}

std::optional<Condition> condition_from_label(const std::string& label) {
  static const Condition all[] = {
      Condition::SideBehavior,    Condition::AttractsBelow,
      Condition::RepelsOnManifold, Condition::ShellContraction,
      Condition::ShellInvariance, Condition::GraphContraction,
      Condition::LipschitzProduct, Condition::OscillationBound,
      Condition::CombinedEstimate, Condition::BasinDrive};
  for (Condition c : all)
    if (label == roman_label(c) || label == condition_name(c)) return c;
  return std::nullopt;
}

const ConditionVerdict* HypothesisVerdict::find(Condition c) const {
  for (const auto& v : conditions)
    if (v.condition == c) return &v;
  return nullptr;
}

double default_inner_cut(double mu, double mu_star, double a, double alpha1) {
  const double span = a - mu_star;
  if (span <= 0.0) return 0.0;
  const double ramp = 4.0 * (mu - mu_star) / span;
  return alpha1 * std::max(0.0, std::min(1.0, ramp));
}

namespace {

ConditionVerdict sup_drf_below_one(const MapFamily& F, double mu,
                                   const TubularRegion& region,
                                   const ManifoldMesh& mesh, int radial,
                                   Condition which) {
  ConditionVerdict v;
  v.condition = which;
  double sup = 0.0;
  const auto rs = radial_grid(region, radial);
  for (double r : rs) {
    for (int ni = 0; ni < mesh.node_count(); ++ni) {
      const double val = std::abs(
          dynsys::split_components(F, {r, mesh.nodes[ni]}, mu, region.alpha)
              .Drf);
      if (val > sup) {
        sup = val;
        v.witness_r = r;
        v.witness_node = ni;
        v.witness_value = val;
      }
    }
  }
  v.margin = 1.0 - sup;
  v.holds = sup < 1.0;
  v.detail = "sup |D_r f| = " + std::to_string(sup);
  return v;
}

ConditionVerdict shell_invariance(const MapFamily& F, double mu,
                                  const TubularRegion& shell,
                                  const ManifoldMesh& mesh, int radial,
                                  const NormReport& norms) {
  ConditionVerdict v;
  v.condition = Condition::ShellInvariance;
  double worst_margin = 1e300;
  const auto rs = radial_grid(shell, radial);
  for (double r : rs) {
    for (int ni = 0; ni < mesh.node_count(); ++ni) {
      const double f = F.f_component(r, mesh.nodes[ni], mu);
      const double margin =
          std::min(shell.alpha - std::abs(f), std::abs(f) - shell.inner_cut);
      if (margin < worst_margin) {
        worst_margin = margin;
        v.witness_r = r;
        v.witness_node = ni;
        v.witness_value = f;
      }
    }
  }
  const bool contained = worst_margin >= -1e-9;
  const bool contracting = norms.c < 1.0;
  v.holds = contained && contracting;
  v.margin = std::min(worst_margin, 1.0 - norms.c);
  v.detail = "containment margin " + std::to_string(worst_margin) +
             ", ||D_r f||_K = " + std::to_string(norms.c);
  return v;
}

}  // namespace

CombinedEstimateVerdict check_combined_estimate(const NormReport& report) {
  CombinedEstimateVerdict v;
  v.holds = report.cor_ix < 1.0;
  v.margin = 1.0 - report.cor_ix;
  v.implies_vi = report.c_star < 1.0;
  v.implies_vii =
      (report.drf + report.dyf) * (report.drg_hat + report.dyg_hat) <= 1.0;
  v.implies_viii = report.sigma < 1.0;
  v.implication_consistent =
      !v.holds || (v.implies_vi && v.implies_vii && v.implies_viii);
  return v;
}

std::vector<HypothesisVerdict> check_map_conditions(
    const MapFamily& F, const std::vector<double>& mu_grid,
    const ManifoldMesh& mesh, const CheckConfig& cfg) {
  std::vector<HypothesisVerdict> out;
  out.reserve(mu_grid.size());
  for (double mu : mu_grid) {
    if (!F.mu_range.contains(mu))
      throw Error("check_map_conditions: mu outside the family range");
    HypothesisVerdict verdict;
    verdict.mu = mu;

    std::vector<Condition> wanted = cfg.requested;
    if (wanted.empty()) {
      wanted.push_back(Condition::SideBehavior);
      if (mu < 0.0) {
        wanted.push_back(Condition::AttractsBelow);
      } else if (mu > cfg.mu_star) {
        wanted.insert(wanted.end(),
                      {Condition::RepelsOnManifold, Condition::ShellContraction,
                       Condition::ShellInvariance, Condition::GraphContraction,
                       Condition::LipschitzProduct,
                       Condition::OscillationBound});
      }
    }

    const double chi = cfg.chi_override
                           ? *cfg.chi_override
                           : default_inner_cut(mu, cfg.mu_star, cfg.a,
                                               cfg.alpha1);
    const TubularRegion tube{cfg.alpha, 0.0, TubularRegion::Side::Both};
    const TubularRegion shell_a{cfg.alpha, cfg.alpha1,
                                TubularRegion::Side::Both};
    const TubularRegion shell_k{cfg.alpha, chi, TubularRegion::Side::Both};

    const bool needs_shell_norms =
        std::any_of(wanted.begin(), wanted.end(), [](Condition c) {
          return c == Condition::ShellInvariance ||
                 c == Condition::GraphContraction ||
                 c == Condition::LipschitzProduct ||
                 c == Condition::OscillationBound ||
                 c == Condition::CombinedEstimate;
        });
    if (needs_shell_norms)
      verdict.shell_norms =
          estimate_norms(F, mu, shell_k, mesh, cfg.radial, cfg.threads);

    for (Condition c : wanted) {
      switch (c) {
        case Condition::SideBehavior: {
          ConditionVerdict v;
          v.condition = c;
          const auto cls = dynsys::classify_side_behavior(
              F, mu, cfg.side_samples, cfg.alpha, cfg.seed);
          const auto expected = cfg.side_reversing_expected
                                    ? dynsys::SideBehavior::Reversing
                                    : dynsys::SideBehavior::Preserving;
          v.holds = cls.behavior == expected;
          v.margin = v.holds ? 1.0 : -1.0;
          v.detail = cls.behavior == dynsys::SideBehavior::Preserving
                         ? "side-preserving"
                         : (cls.behavior == dynsys::SideBehavior::Reversing
                                ? "side-reversing"
                                : "mixed (model inconsistent)");
          verdict.conditions.push_back(std::move(v));
          break;
        }
        case Condition::AttractsBelow:
          verdict.conditions.push_back(
              sup_drf_below_one(F, mu, tube, mesh, cfg.radial, c));
          break;
        case Condition::RepelsOnManifold: {
          ConditionVerdict v;
          v.condition = c;
          double inf = 1e300;
          for (int ni = 0; ni < mesh.node_count(); ++ni) {
            const double val = std::abs(
                dynsys::split_components(F, {0.0, mesh.nodes[ni]}, mu,
                                         cfg.alpha)
                    .Drf);
            if (val < inf) {
              inf = val;
              v.witness_node = ni;
              v.witness_value = val;
            }
          }
          v.margin = inf - 1.0;
          v.holds = inf > 1.0;
          v.detail = "inf |D_r f(0, y)| = " + std::to_string(inf);
          verdict.conditions.push_back(std::move(v));
          break;
        }
        case Condition::ShellContraction:
          verdict.conditions.push_back(
              sup_drf_below_one(F, mu, shell_a, mesh, cfg.radial, c));
          break;
        case Condition::ShellInvariance:
          verdict.conditions.push_back(shell_invariance(
              F, mu, shell_k, mesh, cfg.radial, *verdict.shell_norms));
          break;
        case Condition::GraphContraction: {
          ConditionVerdict v;
          v.condition = c;
          v.holds = verdict.shell_norms->c_star < 1.0;
          v.margin = 1.0 - verdict.shell_norms->c_star;
          v.detail = "c* = " + std::to_string(verdict.shell_norms->c_star);
          verdict.conditions.push_back(std::move(v));
          break;
        }
        case Condition::LipschitzProduct: {
          ConditionVerdict v;
          v.condition = c;
          const auto& n = *verdict.shell_norms;
          const double prod = (n.drf + n.dyf) * (n.drg_hat + n.dyg_hat);
          v.holds = prod <= 1.0 + 1e-12;
          v.margin = 1.0 - prod;
          v.detail = "(||D_r f||+||D_y f||)(||D_r g^||+||D_y g^||) = " +
                     std::to_string(prod);
          verdict.conditions.push_back(std::move(v));
          break;
        }
        case Condition::OscillationBound: {
          ConditionVerdict v;
          v.condition = c;
          v.holds = verdict.shell_norms->sigma < 1.0;
          v.margin = 1.0 - verdict.shell_norms->sigma;
          v.detail = "sigma = " + std::to_string(verdict.shell_norms->sigma);
          verdict.conditions.push_back(std::move(v));
          break;
        }
        case Condition::CombinedEstimate: {
          const auto ce = check_combined_estimate(*verdict.shell_norms);
          ConditionVerdict v;
          v.condition = c;
          v.holds = ce.holds;
          v.margin = ce.margin;
          v.detail = ce.implication_consistent
                         ? "implication cross-check consistent"
                         : "combined estimate holds but an implied condition "
                           "fails";
          verdict.conditions.push_back(std::move(v));
          break;
        }
        case Condition::BasinDrive:
          verdict.conditions.push_back(check_basin_condition(
              F, mu, chi > 0.0 ? chi : cfg.alpha1, mesh, cfg.radial,
              cfg.side_reversing_expected));
          break;
      }
    }
    verdict.overall = std::all_of(verdict.conditions.begin(),
                                  verdict.conditions.end(),
                                  [](const auto& v) { return v.holds; });
    out.push_back(std::move(verdict));
  }
  return out;
}

MuStarBracket find_mu_star(const MapFamily& F, const ManifoldMesh& mesh,
                           double lo, double hi, double width) {
  int evals = 0;
  auto gap = [&](double mu) {
    ++evals;
    double inf = 1e300;
    for (const auto& y : mesh.nodes)
      inf = std::min(inf, std::abs(dynsys::split_components(F, {0.0, y}, mu,
                                                            1e300)
                                       .Drf));
    return inf - 1.0;
  };
  double glo = gap(lo), ghi = gap(hi);
  if (glo == 0.0) return {lo, lo, evals};
  if (ghi == 0.0) return {hi, hi, evals};
  if (glo * ghi > 0.0)
    throw NoCrossing("find_mu_star: inf |D_r f(0, .)| - 1 does not change "
                     "sign on the interval");
  while (hi - lo > width) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // FP resolution floor
    const double gmid = gap(mid);
    if (gmid == 0.0) return {mid, mid, evals};
    if ((gmid > 0.0) == (ghi > 0.0)) {
      hi = mid;
      ghi = gmid;
    } else {
      lo = mid;
      glo = gmid;
    }
  }
  return {lo, hi, evals};
}

ConditionVerdict check_basin_condition(const MapFamily& F, double mu,
                                       double chi,
                                       const ManifoldMesh& mesh, int radial,
                                       bool side_reversing) {
  ConditionVerdict v;
  v.condition = Condition::BasinDrive;
  if (chi <= 0.0) {
    v.holds = false;
    v.detail = "empty inner band (chi = 0)";
    return v;
  }
  double worst = 1e300;
  const auto rs = linspace(chi / radial, chi, radial);
  for (double r0 : rs) {
    for (int ni = 0; ni < mesh.node_count(); ++ni) {
      for (double sgn : {1.0, -1.0}) {
        const double r = sgn * r0;
        const double f = F.f_component(r, mesh.nodes[ni], mu);
        // side-preserving: f must move past r away from M;
        // side-reversing: f lands on the other side with larger magnitude
        const double expected_sign = side_reversing ? -sgn : sgn;
        double margin = (std::abs(f) - std::abs(r));
        if (f * expected_sign < 0.0) margin = -std::abs(f - r);
        if (margin < worst) {
          worst = margin;
          v.witness_r = r;
          v.witness_node = ni;
          v.witness_value = f;
        }
      }
    }
  }
  v.margin = worst;
  v.holds = worst > 0.0;
  v.detail = "min(|f| - |r|) over the inner band = " + std::to_string(worst);
  return v;
}

}  // namespace pitchfork::hypotheses
