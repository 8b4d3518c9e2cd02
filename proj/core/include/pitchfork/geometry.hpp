#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pitchfork/errors.hpp"
#include "pitchfork/linalg.hpp"

namespace pitchfork::geometry {

/// A point of a tubular neighborhood in normal coordinates: signed offset r
/// (positive on the outer, unbounded side) and nearest base point y on M.
struct TubularPoint {
  double r = 0.0;
  Vec y;
};

/// Shell region {inner_cut <= d(x, M) <= alpha}, optionally one-sided.
struct TubularRegion {
  enum class Side { Both, Outer, Inner };

  double alpha = 0.2;
  double inner_cut = 0.0;
  Side side = Side::Both;

  void validate() const {
    if (!(alpha > 0.0) || inner_cut < 0.0 || inner_cut >= alpha)
      throw Error("TubularRegion: need 0 <= inner_cut < alpha");
  }
  bool contains(double r, double tol = 0.0) const {
    const double d = std::abs(r);
    if (d > alpha + tol || d < inner_cut - tol) return false;
    if (side == Side::Outer && r < -tol) return false;
    if (side == Side::Inner && r > tol) return false;
    return true;
  }
};

enum class ManifoldKind { Circle, Sphere, ParamCurve, ParamSurface };

/// Compact connected boundaryless hypersurface of R^m with a projection,
/// an outward normal and tangent frames.  Built-ins are the unit circle
/// (m=2) and unit sphere (m=3); user manifolds come in through charts.
class ReferenceManifold {
 public:
  virtual ~ReferenceManifold() = default;

  virtual ManifoldKind kind() const = 0;
  virtual int ambient_dim() const = 0;
  int intrinsic_dim() const { return ambient_dim() - 1; }

  /// Nearest-point projection into normal coordinates.  Throws
  /// AmbiguousProjection at focal points.  If `region` is given, enforces
  /// membership of the signed offset and throws OutsideTube otherwise.
  virtual TubularPoint project(const Vec& x,
                               const TubularRegion* region = nullptr) const = 0;

  /// Inverse of project: y + r * n(y).  Throws OutsideTube when a region
  /// is given and |r| > alpha.
  virtual Vec embed(const TubularPoint& p,
                    const TubularRegion* region = nullptr) const;

  /// Outward unit normal at a base point y on M.
  virtual Vec outward_normal(const Vec& y) const = 0;

  /// Orthonormal tangent frame at y: m x (m-1), columns span T_y M.
  virtual Mat tangent_frame(const Vec& y) const = 0;

  /// Chart parameter of a base point (m=2 manifolds only; angle for the
  /// unit circle).  Used by the periodic-cubic interpolant.
  virtual std::optional<double> curve_parameter(const Vec& y) const {
    (void)y;
    return std::nullopt;
  }
  /// Parameter period for m=2 manifolds (2*pi for the circle).
  virtual double curve_period() const { return 0.0; }
  /// Chart evaluation for m=2 manifolds; nullopt when there is no chart.
  virtual std::optional<Vec> curve_point(double t) const {
    (void)t;
    return std::nullopt;
  }
  /// Chart evaluation for m=3 chart manifolds ((u, v) sphere-like chart).
  virtual std::optional<Vec> surface_point(double u, double v) const {
    (void)u;
    (void)v;
    return std::nullopt;
  }

  /// Distance from x to M (non-negative).
  double distance(const Vec& x) const { return std::abs(project(x).r); }

  /// Re-projects y0 + step back onto M (walk along the manifold).
  Vec step_on_manifold(const Vec& y0, const Vec& step) const {
    return project(y0 + step).y;
  }

  /// Arclength scale factor of embed(r, .) along tangent directions.
  /// Radially-scaled manifolds (circle/sphere) have the closed form 1+r;
  /// chart manifolds return nullopt and callers fall back to differencing.
  virtual std::optional<double> radial_metric_scale(double r) const {
    (void)r;
    return std::nullopt;
  }
};

using ManifoldPtr = std::shared_ptr<const ReferenceManifold>;

ManifoldPtr make_unit_circle();
ManifoldPtr make_unit_sphere();

/// Closed curve chart for a user manifold in R^2.  gamma must be periodic
/// with the given period; orientation (which side is the bounded region)
/// is detected by ray-casting parity against a seed polygon.
struct CurveChart {
  std::function<Vec(double)> gamma;
  std::function<Vec(double)> dgamma;
  double period = 0.0;
};

/// Closed surface chart for a user manifold in R^3 over
/// (u, v) in [0, pi] x [0, 2*pi), sphere-like (u-poles collapse).
struct SurfaceChart {
  std::function<Vec(double, double)> sigma;
  std::function<Vec(double, double)> dsigma_du;
  std::function<Vec(double, double)> dsigma_dv;
};

ManifoldPtr make_parameterized_curve(CurveChart chart, int seed_samples = 512);
ManifoldPtr make_parameterized_surface(SurfaceChart chart, int seed_samples = 48);

/// Discretization carrier for scalar fields over M.  m=2 meshes are closed
/// polygons with periodic-cubic interpolation; m=3 meshes are subdivided
/// icosahedra (or chart grids) with barycentric-linear interpolation.
struct ManifoldMesh {
  enum class Scheme { PeriodicCubic, BarycentricLinear };

  ManifoldPtr manifold;
  std::vector<Vec> nodes;
  std::vector<std::array<int, 2>> edges;  // m = 2 (closed ring, in order)
  std::vector<std::array<int, 3>> faces;  // m = 3 (closed triangulation)
  /// Per-face neighbor indices (across edge opposite each vertex), m = 3.
  std::vector<std::array<int, 3>> face_neighbors;
  Scheme scheme = Scheme::PeriodicCubic;
  /// Node chart parameters for m=2 meshes (uniform, ascending).
  std::vector<double> node_params;

  int node_count() const { return static_cast<int>(nodes.size()); }
  bool is_closed() const;
  /// Max distance of nodes from M.
  double node_residual() const;
  /// Node neighbor indices (ring or one-ring).
  std::vector<std::vector<int>> adjacency() const;

  void build_face_neighbors();
};

using MeshPtr = std::shared_ptr<const ManifoldMesh>;

/// Builds a closed mesh with at least `resolution` nodes.  Circle meshes
/// use uniform angles (exactly `resolution` nodes, minimum 8); sphere
/// meshes use the smallest subdivided icosahedron with >= resolution
/// vertices (10*4^s + 2, minimum 42).
MeshPtr build_mesh(const ManifoldPtr& manifold, int resolution);

std::string mesh_to_json(const ManifoldMesh& mesh);
MeshPtr mesh_from_json(const std::string& text, const ManifoldPtr& manifold);

/// Scalar field sampled at mesh nodes, evaluable anywhere on M through the
/// mesh's interpolation scheme.  Values are immutable after construction.
class MeshField {
 public:
  MeshField(MeshPtr mesh, Vec values);

  const MeshPtr& mesh() const { return mesh_; }
  const Vec& values() const { return values_; }

  double eval(const Vec& y) const;

  /// Interpolant derivative w.r.t. the chart parameter (m=2 only).
  double eval_dparam(double theta) const;

  /// Piecewise-constant face gradients averaged per node (m=3 only).
  std::vector<Vec> node_gradients() const;

 private:
  double eval_circle(const Vec& y) const;
  double eval_sphere(const Vec& y) const;
  int locate_face(const Vec& y, Eigen::Vector3d& lambda) const;

  MeshPtr mesh_;
  Vec values_;
  Vec spline_m_;  // periodic cubic second derivatives at nodes (m=2)
};

}  // namespace pitchfork::geometry
