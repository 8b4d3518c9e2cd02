#include "pitchfork/graph_transform.hpp"

#include <algorithm>
#include <cmath>

#include "pitchfork/parallel.hpp"

namespace pitchfork::graphtransform {

namespace {

using dynsys::MapFamily;
using geometry::ManifoldMesh;
using geometry::TubularRegion;

constexpr double kRoundoffFloor = 1e-14;

}  // namespace

GraphFunction::GraphFunction(geometry::MeshPtr mesh, Vec values,
                             SignBranch branch)
    : field_(std::move(mesh), std::move(values)), branch_(branch) {}

GraphFunction GraphFunction::constant(geometry::MeshPtr mesh, double value) {
  const int n = mesh->node_count();
  return GraphFunction(std::move(mesh), Vec::Constant(n, value),
                       value >= 0.0 ? SignBranch::Plus : SignBranch::Minus);
}

double GraphFunction::lipschitz_estimate() const {
  const auto& mesh = *field_.mesh();
  const auto& vals = values();
  double worst = 0.0;
  const auto nbr = mesh.adjacency();
  for (int i = 0; i < mesh.node_count(); ++i) {
    for (int j : nbr[i]) {
      if (j <= i) continue;
      const double chord = (mesh.nodes[i] - mesh.nodes[j]).norm();
      worst = std::max(worst, std::abs(vals(i) - vals(j)) / chord);
    }
  }
  return worst;
}

bool GraphFunction::sign_consistent(double tol) const {
  const auto& vals = values();
  if (branch_ == SignBranch::Plus) return vals.minCoeff() >= -tol;
  return vals.maxCoeff() <= tol;
}

bool GraphFunction::contained_in(const TubularRegion& region,
                                 double tol) const {
  const auto& vals = values();
  for (int i = 0; i < vals.size(); ++i)
    if (!region.contains(vals(i), tol)) return false;
  return true;
}

GraphFunction apply_graph_transform(const GraphFunction& psi,
                                    const MapFamily& F, double mu,
                                    double alpha) {
  const auto& mesh = *psi.mesh();
  const auto& vals = psi.values();
  Vec next(vals.size());
  for (int i = 0; i < vals.size(); ++i) {
    const Vec& z = mesh.nodes[i];
    const Vec w = F.inverse_base(vals(i), z, mu);
    const double pulled = psi.eval(w);
    next(i) = F.f_component(pulled, w, mu);
    if (std::abs(next(i)) > alpha + 1e-9)
      throw LeftTube("graph transform: image offset " +
                     std::to_string(next(i)) + " left the tube");
  }
  return GraphFunction(psi.mesh(), std::move(next), psi.branch());
}

namespace {

/// Contraction constant valid for the shell the run actually traversed:
/// sampled c* over {0.9 * min |value| <= |r| <= alpha} on the branch side.
double traversal_c_star(const MapFamily& F, double mu, double alpha,
                        double min_abs_value, SignBranch branch,
                        const geometry::MeshPtr& mesh, int radial) {
  TubularRegion shell;
  shell.alpha = alpha;
  shell.inner_cut = std::min(0.9 * min_abs_value, 0.98 * alpha);
  shell.side = branch == SignBranch::Plus ? TubularRegion::Side::Outer
                                          : TubularRegion::Side::Inner;
  const auto report = hypotheses::estimate_norms(F, mu, shell, *mesh, radial);
  return report.c_star;
}

}  // namespace

std::pair<GraphFunction, FixedPointRun> solve_fixed_point(
    const GraphFunction& psi0, const MapFamily& F, double mu,
    const SolveOptions& opts) {
  FixedPointRun run;
  if (opts.c_star_hint) run.provided_c_star = *opts.c_star_hint;

  GraphFunction psi = psi0;
  run.min_abs_value = psi.values().cwiseAbs().minCoeff();

  auto note_snapshot = [&](const GraphFunction& g, int iter) {
    if (opts.snapshot_stride > 0 && iter % opts.snapshot_stride == 0) {
      run.snapshots.push_back(g.values());
      run.snapshot_iters.push_back(iter);
    }
  };
  note_snapshot(psi, 0);

  double prev_plain_change = std::numeric_limits<double>::infinity();
  bool prev_was_plain = false;
  int nondecreasing_streak = 0;
  // uninterrupted plain-step changes; the observed ratio is a 4-step
  // geometric mean, which keeps extrapolation-amplified node noise out of
  // the contraction statistic
  std::vector<double> plain_stretch;
  constexpr int kRatioWindow = 4;
  // extrapolation cycle state: two previous plain iterates
  std::vector<Vec> cycle;

  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    GraphFunction next = apply_graph_transform(psi, F, mu, opts.alpha);
    const double change = next.sup_distance(psi);
    run.history.push_back({iter, StepKind::Apply, change});
    run.iterates = iter;
    run.last_change = change;
    run.min_abs_value =
        std::min(run.min_abs_value, next.values().cwiseAbs().minCoeff());
    note_snapshot(next, iter);

    if (!next.sign_consistent(1e-12))
      throw BranchCollapse("solve_fixed_point: graph values crossed zero at "
                           "iteration " +
                           std::to_string(iter));

    if (prev_was_plain && prev_plain_change > kRoundoffFloor &&
        change > kRoundoffFloor) {
      nondecreasing_streak = change >= prev_plain_change
                                 ? nondecreasing_streak + 1
                                 : 0;
      if (nondecreasing_streak >= 10)
        throw NotContracting(
            "solve_fixed_point: sup-change non-decreasing for 10 "
            "consecutive iterations (observed ratio " +
            std::to_string(change / prev_plain_change) + ")");
    }
    if (!prev_was_plain) plain_stretch.clear();
    if (change > kRoundoffFloor) {
      plain_stretch.push_back(change);
      if (static_cast<int>(plain_stretch.size()) > kRatioWindow) {
        const double head =
            plain_stretch[plain_stretch.size() - 1 - kRatioWindow];
        run.observed_ratio = std::max(
            run.observed_ratio,
            std::pow(change / head, 1.0 / kRatioWindow));
      }
    } else {
      plain_stretch.clear();
    }
    prev_plain_change = change;
    prev_was_plain = true;

    if (change <= opts.tol) {
      psi = std::move(next);
      run.converged = true;
      break;
    }

    // Geometric-tail extrapolation, gated away from the final stretch so
    // the certificate sees plain steps only.  The dominant contraction
    // ratio is estimated globally (inner products over all nodes), which
    // keeps node-level interpolation noise out of the denominator.
    if (opts.aitken && change > std::max(opts.aitken_gate, 10.0 * opts.tol)) {
      cycle.push_back(psi.values());
      if (cycle.size() == 2) {
        const Vec d1 = cycle[1] - cycle[0];
        const Vec d2 = next.values() - cycle[1];
        cycle.clear();
        const double den = d1.squaredNorm();
        const double lambda = den > 0.0 ? d2.dot(d1) / den : 0.0;
        if (lambda >= 0.2 && lambda <= 0.995) {
          const double gain = lambda / (1.0 - lambda);
          Vec extrap = next.values() + gain * d2;
          // per-node clamp: never extrapolate across zero or out of the tube
          for (int i = 0; i < extrap.size(); ++i) {
            const bool sign_ok = psi.branch() == SignBranch::Plus
                                     ? extrap(i) >= 0.0
                                     : extrap(i) <= 0.0;
            if (!sign_ok || std::abs(extrap(i)) > opts.alpha)
              extrap(i) = next.values()(i);
          }
          GraphFunction jumped(psi.mesh(), std::move(extrap), psi.branch());
          const double jump = jumped.sup_distance(next);
          if (jump > 0.0) {
            ++iter;
            run.history.push_back({iter, StepKind::Extrapolation, jump});
            run.iterates = iter;
            psi = std::move(jumped);
            prev_was_plain = false;
            nondecreasing_streak = 0;
            continue;
          }
        }
      }
    } else {
      cycle.clear();
    }
    psi = std::move(next);
  }

  run.min_abs_value =
      std::min(run.min_abs_value, psi.values().cwiseAbs().minCoeff());
  run.c_star_used =
      traversal_c_star(F, mu, opts.alpha, run.min_abs_value, psi.branch(),
                       psi.mesh(), opts.certificate_radial);
  run.certified = run.c_star_used < 1.0 && run.converged;
  if (run.c_star_used < 1.0)
    run.error_bound =
        run.c_star_used / (1.0 - run.c_star_used) * run.last_change;
  run.residual = apply_graph_transform(psi, F, mu, opts.alpha)
                     .sup_distance(psi);
  return {std::move(psi), std::move(run)};
}

double graph_deviation(const GraphFunction& target,
                       const std::vector<Vec>& points) {
  const auto& man = *target.mesh()->manifold;
  double worst = 0.0;
  for (const auto& x : points) {
    const auto p = man.project(x);
    worst = std::max(worst, std::abs(p.r - target.eval(p.y)));
  }
  return worst;
}

double invariance_deviation(const GraphFunction& psi, const MapFamily& F,
                            double mu) {
  const auto& mesh = *psi.mesh();
  const auto& man = *mesh.manifold;
  std::vector<Vec> images;
  images.reserve(mesh.node_count());
  for (int i = 0; i < mesh.node_count(); ++i)
    images.push_back(
        F.apply(man.embed({psi.values()(i), mesh.nodes[i]}), mu));
  return graph_deviation(psi, images);
}

EmbeddingBounds embedding_bounds(const GraphFunction& psi) {
  const auto& mesh = *psi.mesh();
  const auto& man = *mesh.manifold;
  std::vector<Vec> points;
  points.reserve(mesh.node_count());
  for (int i = 0; i < mesh.node_count(); ++i)
    points.push_back(man.embed({psi.values()(i), mesh.nodes[i]}));
  EmbeddingBounds out;
  out.min_ratio = std::numeric_limits<double>::infinity();
  for (int i = 0; i < mesh.node_count(); ++i) {
    for (int j = i + 1; j < mesh.node_count(); ++j) {
      const double base = (mesh.nodes[i] - mesh.nodes[j]).norm();
      const double image = (points[i] - points[j]).norm();
      const double ratio = image / base;
      out.min_ratio = std::min(out.min_ratio, ratio);
      out.max_ratio = std::max(out.max_ratio, ratio);
    }
  }
  out.injective = out.min_ratio > 0.0;
  return out;
}

namespace {

/// Attraction probe: start off the graph and watch the normal gap shrink.
bool probe_attracting(const GraphFunction& graph, const MapFamily& F,
                      double mu, double delta, int iterations) {
  const auto& mesh = *graph.mesh();
  const auto& man = *mesh.manifold;
  const Vec& y0 = mesh.nodes[0];
  Vec x = man.embed({graph.values()(0) + delta, y0});
  const double initial_gap = delta;
  double gap = initial_gap;
  for (int n = 0; n < iterations; ++n) {
    x = F.apply(x, mu);
    const auto p = man.project(x);
    gap = std::abs(p.r - graph.eval(p.y));
  }
  return gap < 0.2 * std::abs(initial_gap);
}

}  // namespace

BifurcationReport assemble_bifurcation_report(
    const MapFamily& F, const std::vector<double>& mu_grid,
    const geometry::MeshPtr& mesh, const ReportConfig& cfg) {
  BifurcationReport report;
  report.side_reversing = cfg.side_reversing;
  report.mu_star =
      hypotheses::find_mu_star(F, *mesh, -cfg.a, cfg.a, 1e-10);

  // Side-reversing families swap the branches every step; the branches
  // themselves are fixed points of the squared family.
  const MapFamily solver_family =
      cfg.side_reversing ? dynsys::compose(F, F) : F;

  struct Slot {
    std::optional<BranchPair> pair;
    std::string skip_reason;
    double swap_deviation = 0.0;
    double square_invariance = 0.0;
  };
  std::vector<Slot> slots(mu_grid.size());

  parallel_for(static_cast<int>(mu_grid.size()), cfg.threads, [&](int mi) {
    const double mu = mu_grid[mi];
    Slot& slot = slots[mi];
    if (mu <= report.mu_star.hi) {
      slot.skip_reason =
          "mu <= mu*: no bifurcated branches (manifold not yet repelling "
          "everywhere)";
      return;
    }
    const double chi =
        hypotheses::default_inner_cut(mu, cfg.mu_star, cfg.a, cfg.alpha1);
    const double start = initial_offset(chi, cfg.alpha);

    auto [plus, run_plus] = solve_fixed_point(
        GraphFunction::constant(mesh, start), solver_family, mu, cfg.solve);
    auto [minus, run_minus] = solve_fixed_point(
        GraphFunction::constant(mesh, -start), solver_family, mu, cfg.solve);
    BranchPair pair{mu, std::move(plus), std::move(minus),
                    std::move(run_plus), std::move(run_minus)};

    if (pair.plus.values().minCoeff() <= 0.0 ||
        pair.minus.values().maxCoeff() >= 0.0)
      throw BranchCollapse(
          "bifurcation report: branches do not separate by sign");

    // stability labels: derivative along the branch plus a simulation probe
    auto branch_rate = [&](const GraphFunction& g) {
      double sup = 0.0;
      for (int i = 0; i < mesh->node_count(); ++i)
        sup = std::max(sup, std::abs(dynsys::split_components(
                                        solver_family,
                                        {g.values()(i), mesh->nodes[i]}, mu,
                                        cfg.alpha)
                                        .Drf));
      return sup;
    };
    const double probe_delta = std::max(0.25 * chi, 0.02 * cfg.alpha);
    pair.plus_attracting =
        branch_rate(pair.plus) < 1.0 &&
        probe_attracting(pair.plus, solver_family, mu, probe_delta,
                         cfg.probe_iterations);
    pair.minus_attracting =
        branch_rate(pair.minus) < 1.0 &&
        probe_attracting(pair.minus, solver_family, mu, -probe_delta,
                         cfg.probe_iterations);
    double inf_on_m = 1e300;
    for (const auto& y : mesh->nodes)
      inf_on_m = std::min(
          inf_on_m,
          std::abs(dynsys::split_components(F, {0.0, y}, mu, cfg.alpha).Drf));
    pair.manifold_repelling = inf_on_m > 1.0;

    pair.plus_embedding = embedding_bounds(pair.plus);
    pair.minus_embedding = embedding_bounds(pair.minus);
    if (cfg.solve.snapshot_stride > 0) {
      pair.plus_modulus = equicontinuity_probe(
          mesh, pair.run_plus.snapshots, pair.run_plus.snapshot_iters);
      pair.minus_modulus = equicontinuity_probe(
          mesh, pair.run_minus.snapshots, pair.run_minus.snapshot_iters);
    }

    if (cfg.side_reversing) {
      const auto& man = *mesh->manifold;
      std::vector<Vec> mapped_plus, mapped_minus;
      for (int i = 0; i < mesh->node_count(); ++i) {
        mapped_plus.push_back(F.apply(
            man.embed({pair.plus.values()(i), mesh->nodes[i]}), mu));
        mapped_minus.push_back(F.apply(
            man.embed({pair.minus.values()(i), mesh->nodes[i]}), mu));
      }
      slot.swap_deviation = std::max(graph_deviation(pair.minus, mapped_plus),
                                     graph_deviation(pair.plus, mapped_minus));
      slot.square_invariance =
          std::max(invariance_deviation(pair.plus, solver_family, mu),
                   invariance_deviation(pair.minus, solver_family, mu));
    }
    slot.pair = std::move(pair);
  });

  for (size_t mi = 0; mi < slots.size(); ++mi) {
    Slot& slot = slots[mi];
    if (slot.pair) {
      report.swap_deviation =
          std::max(report.swap_deviation, slot.swap_deviation);
      report.square_invariance =
          std::max(report.square_invariance, slot.square_invariance);
      report.branches.push_back(std::move(*slot.pair));
    } else {
      report.skipped.emplace_back(mu_grid[mi], slot.skip_reason);
    }
  }
  return report;
}

ModulusTable equicontinuity_probe(const geometry::MeshPtr& mesh,
                                  const std::vector<Vec>& snapshots,
                                  const std::vector<int>& snapshot_iters,
                                  std::vector<double> deltas) {
  ModulusTable table;
  table.iterations = snapshot_iters;
  table.deltas = std::move(deltas);
  table.modulus =
      Mat::Zero(static_cast<int>(snapshots.size()),
                static_cast<int>(table.deltas.size()));

  if (mesh->scheme == ManifoldMesh::Scheme::PeriodicCubic) {
    const double period = mesh->manifold->curve_period();
    const int dense = 4 * mesh->node_count();
    for (size_t si = 0; si < snapshots.size(); ++si) {
      const geometry::MeshField field(mesh, snapshots[si]);
      for (size_t di = 0; di < table.deltas.size(); ++di) {
        // chord delta -> parameter arc on the unit circle
        const double arc = 2.0 * std::asin(std::min(1.0, table.deltas[di] / 2.0));
        double worst = 0.0;
        for (int k = 0; k < dense; ++k) {
          const double theta = period * k / dense;
          worst = std::max(worst, std::abs(field.eval_dparam(theta + arc) -
                                           field.eval_dparam(theta)));
        }
        table.modulus(static_cast<int>(si), static_cast<int>(di)) = worst;
      }
    }
    return table;
  }

  for (size_t si = 0; si < snapshots.size(); ++si) {
    const geometry::MeshField field(mesh, snapshots[si]);
    const auto grads = field.node_gradients();
    for (size_t di = 0; di < table.deltas.size(); ++di) {
      double worst = 0.0;
      for (int i = 0; i < mesh->node_count(); ++i) {
        for (int j = i + 1; j < mesh->node_count(); ++j) {
          if ((mesh->nodes[i] - mesh->nodes[j]).norm() > table.deltas[di])
            continue;
          worst = std::max(worst, (grads[i] - grads[j]).norm());
        }
      }
      table.modulus(static_cast<int>(si), static_cast<int>(di)) = worst;
    }
  }
  return table;
}

}  // namespace pitchfork::graphtransform
