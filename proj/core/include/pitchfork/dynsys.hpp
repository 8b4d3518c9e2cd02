#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "pitchfork/geometry.hpp"
#include "pitchfork/linalg.hpp"
#include "pitchfork/sigma_profile.hpp"

namespace pitchfork::dynsys {

/// Validity interval of the family parameter (symmetric, endpoint-closed).
struct MuRange {
  double a = 0.04;
  bool contains(double mu) const { return std::abs(mu) <= a + 1e-15; }
};

/// Tubular-coordinate evaluation of a map at one point: normal component
/// f, base component g, and the four Jacobian blocks expressed in
/// orthonormal tangent frames (inputs at y, outputs at the image base).
struct ComponentEval {
  double f = 0.0;
  Vec g;
  double Drf = 0.0;
  RowVec Dyf;
  Vec Drg;
  Mat Dyg;
};

/// Maps of the form x -> q(|x|) * Rot * (x/|x|) on radially-projected
/// manifolds: the whole tubular calculus is closed-form.
struct RadialRotationModel {
  std::function<double(double s, double mu)> q;
  std::function<double(double s, double mu)> dq;
  /// Solves q(s, mu) = rho; monotone in s (either direction).
  std::function<double(double rho, double mu)> q_inverse;
  Mat rotation;
};

/// One-parameter family of C^1 diffeomorphisms leaving a declared
/// reference manifold invariant.  Evaluators must be pure; missing hooks
/// fall back to damped-Newton inverses and central finite differences.
class MapFamily {
 public:
  using ForwardFn = std::function<Vec(const Vec&, double)>;
  using JacobianFn = std::function<Mat(const Vec&, double)>;

  geometry::ManifoldPtr manifold;
  ForwardFn forward;
  std::optional<ForwardFn> inverse;
  std::optional<JacobianFn> jacobian;          // ambient m x m of F
  std::optional<JacobianFn> inverse_jacobian;  // ambient m x m of F^{-1}
  std::optional<RadialRotationModel> model;
  MuRange mu_range;
  double fd_step = 1e-5;
  std::string name = "custom";

  Vec apply(const Vec& x, double mu) const;
  /// Inverse image; damped Newton on `forward` when no hook is given.
  Vec apply_inverse(const Vec& x, double mu) const;
  Mat jacobian_at(const Vec& x, double mu) const;

  /// Normal component f(r, y) without Jacobian blocks.
  double f_component(double r, const Vec& y, double mu) const;
  /// Base component of F^{-1} at (r, z) (the graph-transform pullback).
  Vec inverse_base(double r, const Vec& z, double mu) const;

  bool has_analytic_blocks() const { return model.has_value(); }
};

/// Component split of F at a tubular point, with Jacobian blocks.  Blocks
/// come from the radial-rotation model when available, else from the
/// ambient Jacobian hook (radially-projected manifolds), else from central
/// finite differences.  Throws LeftTube when the image exits N(alpha).
ComponentEval split_components(const MapFamily& F, const geometry::TubularPoint& p,
                               double mu, double alpha);

/// Component split of F^{-1} at a tubular point.
ComponentEval inverse_components(const MapFamily& F,
                                 const geometry::TubularPoint& p, double mu,
                                 double alpha);

enum class SideBehavior { Preserving, Reversing, Mixed };

struct SideClassification {
  SideBehavior behavior = SideBehavior::Preserving;
  int samples = 0;
  /// Present only for Mixed: one inner point that stayed inner and one
  /// that crossed to the outer region.
  std::optional<std::pair<Vec, Vec>> mixed_witness;
};

/// Classifies by mapping sampled inner points (-alpha < r < 0).  Mixed is
/// a reported outcome (it signals a model inconsistent with invariance),
/// not an error.
SideClassification classify_side_behavior(const MapFamily& F, double mu,
                                          int samples, double alpha,
                                          std::uint64_t seed = 12345);

/// The canonical family F_mu(x) = sigma_mu(|x|) A x on the unit circle or
/// sphere.  A must be special orthogonal (validated; throws NotRotation).
MapFamily canonical_family(int ambient_dim, const Mat& rotation,
                           double mu_cap = 0.04);

/// Radius-flip wrapper G = R o F with R(x) = ((2 - |x|)/|x|) x: turns the
/// canonical side-preserving family into a side-reversing one.
MapFamily side_reversing_wrap(const MapFamily& F);

/// Composition outer(inner(.)); composes models when both are radial with
/// the same manifold.
MapFamily compose(const MapFamily& outer, const MapFamily& inner);

MapFamily identity_family(const geometry::ManifoldPtr& manifold);

/// Max over mesh nodes of d(F_mu(y), M): invariance defect of M.
double invariance_defect(const MapFamily& F, const geometry::ManifoldMesh& mesh,
                         double mu);

/// Max over sampled tube points of |F^{-1}(F(x)) - x|.
double inverse_defect(const MapFamily& F, double mu, double alpha, int samples,
                      std::uint64_t seed = 999);

/// Rotation helpers for problem setup.
Mat rotation2d(double angle);
Mat rotation3d(const Vec& axis, double angle);

}  // namespace pitchfork::dynsys
