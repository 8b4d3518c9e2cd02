#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "pitchfork/dynsys.hpp"
#include "pitchfork/geometry.hpp"
#include "pitchfork/graph_transform.hpp"
#include "pitchfork/gronwall.hpp"
#include "pitchfork/hypotheses.hpp"

namespace pitchfork::flow {

/// Fixed-step classical RK4.  `h` is the nominal step; the last step is
/// shortened to land exactly on t.
struct StepControl {
  double h = 1e-3;
};

/// One-parameter C^1 vector field family leaving a declared manifold
/// invariant (the normal rate vanishes on M).
class VectorFieldFamily {
 public:
  using FieldFn = std::function<Vec(const Vec&, double)>;
  using JacFn = std::function<Mat(const Vec&, double)>;

  geometry::ManifoldPtr manifold;
  FieldFn eval;
  std::optional<JacFn> jacobian;
  dynsys::MuRange mu_range;
  double fd_step = 1e-6;
  std::string name = "field";

  Mat jacobian_at(const Vec& x, double mu) const;

  /// Normal rate R and tangential (arclength) rate Y at a tubular point.
  struct Rates {
    double R = 0.0;
    Vec Y;
  };
  Rates components(const geometry::TubularPoint& p, double mu) const;

  /// Derivative blocks of (R, Y) in tubular coordinates, by central
  /// differences of `components`.
  struct RateBlocks {
    double R = 0.0;
    Vec Y;
    double DrR = 0.0;
    RowVec DyR;
    Vec DrY;
    Mat DyY;
  };
  RateBlocks rate_blocks(const geometry::TubularPoint& p, double mu) const;
};

/// Built-in continuous model: radial rate mu*r - r^3 about the unit
/// circle/sphere with a unit-angular-speed rotation (about z for m=3).
VectorFieldFamily model_field(int ambient_dim);

/// Flow endpoint phi(t, x0, mu).  Throws LeftTube when `tube_guard` is
/// given and the trajectory leaves {d(x, M) <= guard}.
Vec integrate_flow(const VectorFieldFamily& X, const Vec& x0, double mu,
                   double t, const StepControl& sc = {},
                   std::optional<double> tube_guard = std::nullopt);

/// Full trajectory dump at the integrator steps: (t_k, x(t_k)).
std::vector<std::pair<double, Vec>> integrate_path(
    const VectorFieldFamily& X, const Vec& x0, double mu, double t,
    const StepControl& sc = {});

/// Step-halving check: |phi_h(t, x0) - phi_{h/2}(t, x0)| at the endpoint,
/// an a-posteriori estimate of the fixed-step integration error.
double richardson_error(const VectorFieldFamily& X, const Vec& x0, double mu,
                        double t, const StepControl& sc = {});

/// Variational solution Dphi(t, x0, mu): the matrix IVP integrated
/// alongside the flow.
Mat variational_jacobian(const VectorFieldFamily& X, double mu, const Vec& x0,
                         double t, const StepControl& sc = {});

/// Time-t map as a discrete family: forward/backward integration with
/// variational Jacobians, eligible for the full hypotheses/solver path.
dynsys::MapFamily time_t_map(const VectorFieldFamily& X, double t,
                             const StepControl& sc = {});

enum class FlowCondition {
  PointsInward,    // (i)   field enters N(alpha) on its boundary
  AttractsBelow,   // (ii)  D_r R < 0 on N(alpha), mu < 0
  RepelsOnM,       // (iii) D_r R > 0 on M, mu > mu*
  ShellDecay,      // (iv)  field enters the shell A; D_r R <= -2s there
  ComparisonBounds // (v)   fitted (s, sigma, nu) pass the E-bound tests
};

const char* flow_condition_label(FlowCondition c);

struct FlowConditionVerdict {
  FlowCondition condition = FlowCondition::PointsInward;
  bool holds = false;
  double margin = 0.0;
  std::string detail;
};

struct FlowVerdict {
  double mu = 0.0;
  std::vector<FlowConditionVerdict> conditions;
  bool overall = false;
  GronwallParams fitted{0, 0, 0, 2.0};
};

struct FlowCheckConfig {
  double alpha = 0.2;
  double alpha1 = 0.1;
  double mu_star = 0.0;
  std::vector<double> t_values = {1.0, 1.5, 2.0};
  int radial = 33;
  StepControl step;
};

std::vector<FlowVerdict> check_flow_conditions(
    const VectorFieldFamily& X, const std::vector<double>& mu_grid,
    const geometry::ManifoldMesh& mesh, const FlowCheckConfig& cfg);

/// Transports branch-graph nodes by the flow for each t and measures the
/// worst normal deviation from the interpolated graph: the computed
/// manifolds must be flow-invariant for every t, not just the solver's t.
double verify_invariance_across_t(
    const VectorFieldFamily& X, double mu,
    const std::vector<const graphtransform::GraphFunction*>& branches,
    const std::vector<double>& t_set, const StepControl& sc = {});

}  // namespace pitchfork::flow
