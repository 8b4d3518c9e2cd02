#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pitchfork/dynsys.hpp"
#include "pitchfork/geometry.hpp"

namespace pitchfork::hypotheses {

/// Sampled sup norms of the tubular Jacobian blocks over a shell region,
/// with the derived contraction constants.  Sampled sups are lower bounds
/// on the true sups; `delta_*` report the change from the half-resolution
/// subgrid as a refinement diagnostic.
struct NormReport {
  geometry::TubularRegion region;
  double mu = 0.0;
  double drf = 0.0, dyf = 0.0, drg_hat = 0.0, dyg_hat = 0.0;
  double dyg = 0.0, drg = 0.0;
  double c = 0.0;       // ||D_r f||
  double c_star = 0.0;  // ||D_r f||(1 + ||D_r g^||) + ||D_y f||
  double sigma = 0.0;   // ||D_r f||(2||D_r g^|| + ||D_y g^||) + ||D_y f|| ||D_r g^||
  double cor_ix = 0.0;  // ||D_r f|| ||D_r g^|| + (||D_r f|| + ||D_y f||)(1 + ||D_r g^||)
  int grid_radial = 0, grid_mesh = 0;
  double delta_drf = 0.0, delta_dyf = 0.0, delta_drg_hat = 0.0,
         delta_dyg_hat = 0.0;
};

/// Radial sample values for a shell region (endpoints included; both sides
/// mirrored unless the region is one-sided).
std::vector<double> radial_grid(const geometry::TubularRegion& region, int n);

/// Norm sampling is a map-reduce with max reduction: `threads` > 1 splits
/// the radial grid across workers with identical results.
NormReport estimate_norms(const dynsys::MapFamily& F, double mu,
                          const geometry::TubularRegion& region,
                          const geometry::ManifoldMesh& mesh, int radial = 64,
                          int threads = 1);

/// The ten checkable conditions on a map family around its invariant
/// manifold, labelled (i)..(x) in reports.
enum class Condition {
  SideBehavior,           // (i)   side-preserving (or declared reversing)
  AttractsBelow,          // (ii)  sup |D_r f| < 1 on N(alpha), mu < 0
  RepelsOnManifold,       // (iii) inf |D_r f(0, y)| > 1, mu > mu*
  ShellContraction,       // (iv)  sup |D_r f| < 1 on the outer shell A
  ShellInvariance,        // (v)   F(K) inside K and ||D_r f||_K < 1
  GraphContraction,       // (vi)  c* < 1
  LipschitzProduct,       // (vii) (||D_r f||+||D_y f||)(||D_r g^||+||D_y g^||) <= 1
  OscillationBound,       // (viii) sigma < 1
  CombinedEstimate,       // (ix)  single estimate implying (vi)-(viii)
  BasinDrive,             // (x)   f(r, y) drives |r| outward below the shell
};

const char* roman_label(Condition c);
const char* condition_name(Condition c);
std::optional<Condition> condition_from_label(const std::string& label);

struct ConditionVerdict {
  Condition condition = Condition::SideBehavior;
  bool holds = false;
  double margin = 0.0;  // positive slack when the condition holds
  double witness_r = 0.0;
  int witness_node = -1;
  double witness_value = 0.0;
  std::string detail;
};

struct HypothesisVerdict {
  double mu = 0.0;
  std::vector<ConditionVerdict> conditions;
  bool overall = false;
  std::optional<NormReport> shell_norms;  // over K(mu), when evaluated

  const ConditionVerdict* find(Condition c) const;
};

struct CheckConfig {
  double alpha = 0.2;
  double alpha1 = 0.15;
  std::optional<double> chi_override;
  double mu_star = 0.0;
  double a = 0.04;
  int radial = 64;
  int side_samples = 64;
  int threads = 1;
  std::uint64_t seed = 12345;
  /// Empty = defaults by the sign of mu: {i, ii} for mu < 0 and
  /// {i, iii..viii} for mu > mu*.
  std::vector<Condition> requested;
  bool side_reversing_expected = false;
};

/// chi(mu) = alpha1 * clamp(4 (mu - mu*) / (a - mu*), 0, 1): continuous,
/// zero at mu*, capped at alpha1.
double default_inner_cut(double mu, double mu_star, double a, double alpha1);

std::vector<HypothesisVerdict> check_map_conditions(
    const dynsys::MapFamily& F, const std::vector<double>& mu_grid,
    const geometry::ManifoldMesh& mesh, const CheckConfig& cfg);

/// Condition (ix) on an existing report, with the programmatic cross-check
/// that (vi)-(viii) hold on the same report whenever (ix) does.
struct CombinedEstimateVerdict {
  bool holds = false;
  double margin = 0.0;
  bool implies_vi = false, implies_vii = false, implies_viii = false;
  bool implication_consistent = false;
};
CombinedEstimateVerdict check_combined_estimate(const NormReport& report);

struct MuStarBracket {
  double lo = 0.0, hi = 0.0;
  int evaluations = 0;
  double width() const { return hi - lo; }
};

/// Bisection bracket of the crossing of inf_y |D_r f_mu(0, y)| through 1.
/// Throws NoCrossing when the endpoints do not straddle.
MuStarBracket find_mu_star(const dynsys::MapFamily& F,
                           const geometry::ManifoldMesh& mesh, double lo,
                           double hi, double width = 1e-10);

/// Condition (x): sampled check that f pushes offsets away from M inside
/// the inner cut (side-preserving), or across with growing magnitude
/// (side-reversing).
ConditionVerdict check_basin_condition(const dynsys::MapFamily& F, double mu,
                                       double chi,
                                       const geometry::ManifoldMesh& mesh,
                                       int radial, bool side_reversing);

}  // namespace pitchfork::hypotheses
