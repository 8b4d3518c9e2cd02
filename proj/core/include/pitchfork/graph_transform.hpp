#pragma once

#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pitchfork/dynsys.hpp"
#include "pitchfork/geometry.hpp"
#include "pitchfork/hypotheses.hpp"

namespace pitchfork::graphtransform {

enum class SignBranch { Plus, Minus };

/// Candidate manifold as a graph over M: mesh-sampled offsets with the
/// mesh's interpolation scheme.  Plus-branch values are >= 0, minus <= 0.
class GraphFunction {
 public:
  GraphFunction(geometry::MeshPtr mesh, Vec values, SignBranch branch);
  static GraphFunction constant(geometry::MeshPtr mesh, double value);

  const geometry::MeshPtr& mesh() const { return field_.mesh(); }
  const Vec& values() const { return field_.values(); }
  SignBranch branch() const { return branch_; }
  const geometry::MeshField& field() const { return field_; }

  double eval(const Vec& y) const { return field_.eval(y); }

  /// Max over adjacent node pairs of |psi_i - psi_j| / chord distance.
  double lipschitz_estimate() const;

  double sup_distance(const GraphFunction& other) const {
    return (values() - other.values()).lpNorm<Eigen::Infinity>();
  }

  bool sign_consistent(double tol = 1e-12) const;
  bool contained_in(const geometry::TubularRegion& region,
                    double tol = 1e-12) const;

 private:
  geometry::MeshField field_;
  SignBranch branch_;
};

/// One application of the graph-transform operator: at every mesh node z,
/// pull back through ginv = inverse base of (psi(z), z), interpolate psi
/// there, and push the offset through the normal component f.
GraphFunction apply_graph_transform(const GraphFunction& psi,
                                    const dynsys::MapFamily& F, double mu,
                                    double alpha);

enum class StepKind { Apply, Extrapolation };

struct StepRecord {
  int index = 0;
  StepKind kind = StepKind::Apply;
  double sup_change = 0.0;
};

struct SolveOptions {
  double tol = 1e-12;
  int max_iter = 500;
  /// Aitken delta-squared acceleration of the linearly-converging tail;
  /// disabled automatically once changes fall below the gate so that the
  /// final stretch is plain operator iteration (certificate-friendly).
  bool aitken = true;
  double aitken_gate = 1e-9;
  double alpha = 0.2;
  std::optional<double> c_star_hint;
  int snapshot_stride = 0;  // 0 = keep no iterate snapshots
  int certificate_radial = 33;
};

struct FixedPointRun {
  int iterates = 0;
  std::vector<StepRecord> history;
  double c_star_used = std::numeric_limits<double>::quiet_NaN();
  double provided_c_star = std::numeric_limits<double>::quiet_NaN();
  double error_bound = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool certified = false;
  /// Max ratio of consecutive plain-step sup-changes (above the roundoff
  /// floor); the invariant link to c*.
  double observed_ratio = 0.0;
  double last_change = std::numeric_limits<double>::infinity();
  double residual = std::numeric_limits<double>::infinity();
  double min_abs_value = std::numeric_limits<double>::infinity();
  std::vector<Vec> snapshots;
  std::vector<int> snapshot_iters;
};

/// Banach iteration psi <- F(psi) until sup-change <= tol or max_iter,
/// with the a-posteriori bound c*/(1-c*) * last change.  Throws
/// NotContracting after 10 consecutive non-decreasing plain changes and
/// BranchCollapse when values cross zero.
std::pair<GraphFunction, FixedPointRun> solve_fixed_point(
    const GraphFunction& psi0, const dynsys::MapFamily& F, double mu,
    const SolveOptions& opts = {});

/// The proof-style start value (chi + alpha)/2.
inline double initial_offset(double chi, double alpha) {
  return 0.5 * (chi + alpha);
}

/// Per-node distance of mapped graph points to another graph.
double graph_deviation(const GraphFunction& target,
                       const std::vector<Vec>& points);

/// Numeric stand-in for the diffeomorphy of H(y) = (psi(y), y): pairwise
/// expansion ratios |H(y_i) - H(y_j)| / |y_i - y_j| over all node pairs.
/// H is injective on the sample iff min_ratio > 0.
struct EmbeddingBounds {
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  bool injective = false;
};
EmbeddingBounds embedding_bounds(const GraphFunction& psi);

/// Max over nodes of the normal distance between F(graph point) and the
/// interpolated graph: invariance defect of the computed manifold.
double invariance_deviation(const GraphFunction& psi,
                            const dynsys::MapFamily& F, double mu);

struct ModulusTable {
  std::vector<int> iterations;
  std::vector<double> deltas;
  Mat modulus;  // iterations x deltas
};

struct BranchPair {
  double mu = 0.0;
  GraphFunction plus, minus;
  FixedPointRun run_plus, run_minus;
  bool plus_attracting = false;
  bool minus_attracting = false;
  bool manifold_repelling = false;
  EmbeddingBounds plus_embedding, minus_embedding;
  /// Derivative-oscillation diagnostics, populated when the solver keeps
  /// iterate snapshots (ReportConfig::solve.snapshot_stride > 0).
  std::optional<ModulusTable> plus_modulus, minus_modulus;
};

struct ReportConfig {
  double alpha = 0.2;
  double alpha1 = 0.15;
  double mu_star = 0.0;
  double a = 0.04;
  SolveOptions solve;
  int probe_iterations = 400;
  bool side_reversing = false;
  int threads = 1;  // parallelism across mu values
};

struct BifurcationReport {
  hypotheses::MuStarBracket mu_star;
  std::vector<BranchPair> branches;
  std::vector<std::pair<double, std::string>> skipped;  // mu -> reason
  bool side_reversing = false;
  /// Reversing families only: Hausdorff-style deviation of G(plus graph)
  /// from the minus graph, and invariance defect of each branch under GoG.
  double swap_deviation = 0.0;
  double square_invariance = 0.0;
};

BifurcationReport assemble_bifurcation_report(
    const dynsys::MapFamily& F, const std::vector<double>& mu_grid,
    const geometry::MeshPtr& mesh, const ReportConfig& cfg);

/// Derivative-oscillation table of retained iterates: for each snapshot,
/// max |Dpsi(z + dz) - Dpsi(z)| over pairs at chord scale <= delta.
ModulusTable equicontinuity_probe(
    const geometry::MeshPtr& mesh, const std::vector<Vec>& snapshots,
    const std::vector<int>& snapshot_iters,
    std::vector<double> deltas = {0.125, 0.0625, 0.03125, 0.015625, 0.0078125,
                                  0.00390625});

}  // namespace pitchfork::graphtransform
