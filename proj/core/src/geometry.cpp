#include "pitchfork/geometry.hpp"

#include <cmath>

namespace pitchfork::geometry {

namespace {

constexpr double kProjectionTol = 1e-12;
constexpr int kProjectionMaxIter = 50;
constexpr double kFocalTol = 1e-9;
constexpr double kTwoPi = 2.0 * M_PI;

void check_region(double r, const TubularRegion* region) {
  if (region && std::abs(r) > region->alpha + 1e-12)
    throw OutsideTube("tubular point offset " + std::to_string(r) +
                      " exceeds alpha=" + std::to_string(region->alpha));
}

/// Unit circle (m=2) and unit sphere (m=3): projection is radial.
class RadialManifold : public ReferenceManifold {
 public:
  explicit RadialManifold(int dim) : dim_(dim) {}

  ManifoldKind kind() const override {
    return dim_ == 2 ? ManifoldKind::Circle : ManifoldKind::Sphere;
  }
  int ambient_dim() const override { return dim_; }

  TubularPoint project(const Vec& x,
                       const TubularRegion* region) const override {
    const double rho = x.norm();
    if (rho < kFocalTol)
      throw AmbiguousProjection("projection undefined at the origin");
    TubularPoint p{rho - 1.0, x / rho};
    check_region(p.r, region);
    return p;
  }

  Vec embed(const TubularPoint& p, const TubularRegion* region) const override {
    check_region(p.r, region);
    const double rho = p.y.norm();
    return p.y * ((1.0 + p.r) / rho);
  }

  Vec outward_normal(const Vec& y) const override { return y / y.norm(); }

  Mat tangent_frame(const Vec& y) const override {
    const Vec n = y / y.norm();
    Mat frame(dim_, dim_ - 1);
    if (dim_ == 2) {
      frame(0, 0) = -n(1);
      frame(1, 0) = n(0);
    } else {
      // fixed smooth frame away from the z-poles, rebuilt near them
      Eigen::Vector3d nn(n(0), n(1), n(2));
      Eigen::Vector3d seed = std::abs(nn.z()) < 0.9
                                 ? Eigen::Vector3d(0, 0, 1)
                                 : Eigen::Vector3d(1, 0, 0);
      Eigen::Vector3d t1 = seed.cross(nn).normalized();
      Eigen::Vector3d t2 = nn.cross(t1);
      frame.col(0) = t1;
      frame.col(1) = t2;
    }
    return frame;
  }

  std::optional<double> curve_parameter(const Vec& y) const override {
    if (dim_ != 2) return std::nullopt;
    double theta = std::atan2(y(1), y(0));
    if (theta < 0.0) theta += kTwoPi;
    return theta;
  }
  double curve_period() const override { return dim_ == 2 ? kTwoPi : 0.0; }
  std::optional<Vec> curve_point(double t) const override {
    if (dim_ != 2) return std::nullopt;
    Vec y(2);
    y << std::cos(t), std::sin(t);
    return y;
  }

  std::optional<double> radial_metric_scale(double r) const override {
    return 1.0 + r;
  }

 private:
  int dim_;
};

/// Parity of ray/segment crossings for a closed polygon; even means the
/// start point is in the unbounded component.
bool ray_exits_polygon(const Vec& start, const Vec& dir,
                       const std::vector<Vec>& poly) {
  int crossings = 0;
  const int n = static_cast<int>(poly.size());
  for (int i = 0; i < n; ++i) {
    const Vec& a = poly[i];
    const Vec& b = poly[(i + 1) % n];
    // solve start + t*dir = a + s*(b-a)
    const double dx = dir(0), dy = dir(1);
    const double ex = b(0) - a(0), ey = b(1) - a(1);
    const double det = dx * (-ey) - (-ex) * dy;
    if (std::abs(det) < 1e-14) continue;
    const double rx = a(0) - start(0), ry = a(1) - start(1);
    const double t = (rx * (-ey) + ex * ry) / det;
    const double s = (dx * ry - dy * rx) / det;
    if (t > 1e-10 && s >= 0.0 && s < 1.0) ++crossings;
  }
  return crossings % 2 == 0;
}

class ParamCurveManifold : public ReferenceManifold {
 public:
  ParamCurveManifold(CurveChart chart, int seed_samples)
      : chart_(std::move(chart)) {
    if (!chart_.gamma || !chart_.dgamma || chart_.period <= 0.0)
      throw UnsupportedManifold("curve chart needs gamma, dgamma and period");
    seeds_.reserve(seed_samples);
    seed_params_.reserve(seed_samples);
    for (int i = 0; i < seed_samples; ++i) {
      const double t = chart_.period * i / seed_samples;
      seeds_.push_back(chart_.gamma(t));
      seed_params_.push_back(t);
    }
    // Outward = rotate tangent by -90deg for counter-clockwise charts;
    // checked by parity and flipped when the chart runs clockwise.
    const Vec y0 = seeds_[0];
    Vec n0 = rotate_tangent(chart_.dgamma(0.0));
    const Vec probe = y0 + 1e-4 * n0;
    orient_ = ray_exits_polygon(probe, n0, seeds_) ? 1.0 : -1.0;
  }

  ManifoldKind kind() const override { return ManifoldKind::ParamCurve; }
  int ambient_dim() const override { return 2; }

  TubularPoint project(const Vec& x,
                       const TubularRegion* region) const override {
    const double t = project_param(x);
    const Vec y = chart_.gamma(t);
    const Vec n = normal_at_param(t);
    TubularPoint p{(x - y).dot(n), y};
    check_region(p.r, region);
    return p;
  }

  Vec outward_normal(const Vec& y) const override {
    return normal_at_param(project_param(y));
  }

  Mat tangent_frame(const Vec& y) const override {
    const double t = project_param(y);
    Mat frame(2, 1);
    frame.col(0) = chart_.dgamma(t).normalized();
    return frame;
  }

  std::optional<double> curve_parameter(const Vec& y) const override {
    return project_param(y);
  }
  double curve_period() const override { return chart_.period; }
  std::optional<Vec> curve_point(double t) const override {
    return chart_.gamma(t);
  }

  double project_param(const Vec& x) const {
    // nearest seed, then Newton on the stationarity of |x - gamma(t)|^2
    int best = 0;
    double best_d = (x - seeds_[0]).squaredNorm();
    for (int i = 1; i < static_cast<int>(seeds_.size()); ++i) {
      const double d = (x - seeds_[i]).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    double t = seed_params_[best];
    const double spacing = chart_.period / seeds_.size();
    const double fd = 1e-6 * chart_.period;
    for (int it = 0; it < kProjectionMaxIter; ++it) {
      const Vec g = chart_.gamma(t);
      const Vec dg = chart_.dgamma(t);
      const Vec ddg = (chart_.dgamma(t + fd) - chart_.dgamma(t - fd)) /
                      (2.0 * fd);
      const double grad = (x - g).dot(dg);
      const double hess = dg.squaredNorm() - (x - g).dot(ddg);
      double step = hess > 0.0 ? grad / hess : grad / dg.squaredNorm();
      step = std::clamp(step, -2.0 * spacing, 2.0 * spacing);
      t += step;
      if (std::abs(step) * dg.norm() < kProjectionTol) {
        return wrap_param(t);
      }
    }
    throw AmbiguousProjection("curve projection did not settle in 50 steps");
  }

 private:
  static Vec rotate_tangent(const Vec& tan) {
    Vec n(2);
    n(0) = tan(1);
    n(1) = -tan(0);
    return n / n.norm();
  }

  Vec normal_at_param(double t) const {
    return orient_ * rotate_tangent(chart_.dgamma(t));
  }

  double wrap_param(double t) const {
    t = std::fmod(t, chart_.period);
    if (t < 0.0) t += chart_.period;
    return t;
  }

  CurveChart chart_;
  std::vector<Vec> seeds_;
  std::vector<double> seed_params_;
  double orient_ = 1.0;
};

/// Moller-Trumbore segment/triangle parity test against a seed mesh.
bool ray_exits_trimesh(const Eigen::Vector3d& start, const Eigen::Vector3d& dir,
                       const std::vector<Vec>& nodes,
                       const std::vector<std::array<int, 3>>& faces) {
  int crossings = 0;
  for (const auto& f : faces) {
    const Eigen::Vector3d a = nodes[f[0]];
    const Eigen::Vector3d b = nodes[f[1]];
    const Eigen::Vector3d c = nodes[f[2]];
    const Eigen::Vector3d e1 = b - a, e2 = c - a;
    const Eigen::Vector3d p = dir.cross(e2);
    const double det = e1.dot(p);
    if (std::abs(det) < 1e-14) continue;
    const Eigen::Vector3d tv = start - a;
    const double u = tv.dot(p) / det;
    if (u < 0.0 || u > 1.0) continue;
    const Eigen::Vector3d q = tv.cross(e1);
    const double v = dir.dot(q) / det;
    if (v < 0.0 || u + v > 1.0) continue;
    const double t = e2.dot(q) / det;
    if (t > 1e-10) ++crossings;
  }
  return crossings % 2 == 0;
}

class ParamSurfaceManifold : public ReferenceManifold {
 public:
  ParamSurfaceManifold(SurfaceChart chart, int seed_samples)
      : chart_(std::move(chart)) {
    if (!chart_.sigma || !chart_.dsigma_du || !chart_.dsigma_dv)
      throw UnsupportedManifold("surface chart needs sigma and both partials");
    build_seeds(seed_samples);
    // orientation from chart ordering (du x dv), validated by parity
    const double u0 = M_PI / 2, v0 = 0.0;
    const Eigen::Vector3d y0 = chart_.sigma(u0, v0);
    Eigen::Vector3d n0 =
        Eigen::Vector3d(chart_.dsigma_du(u0, v0))
            .cross(Eigen::Vector3d(chart_.dsigma_dv(u0, v0)))
            .normalized();
    const Eigen::Vector3d probe = y0 + 1e-4 * n0;
    orient_ = ray_exits_trimesh(probe, n0, seed_nodes_, seed_faces_) ? 1.0 : -1.0;
  }

  ManifoldKind kind() const override { return ManifoldKind::ParamSurface; }
  int ambient_dim() const override { return 3; }

  TubularPoint project(const Vec& x,
                       const TubularRegion* region) const override {
    const auto [u, v] = project_params(x);
    const Vec y = chart_.sigma(u, v);
    const Vec n = normal_at(u, v);
    TubularPoint p{(x - y).dot(n), y};
    check_region(p.r, region);
    return p;
  }

  Vec outward_normal(const Vec& y) const override {
    const auto [u, v] = project_params(y);
    return normal_at(u, v);
  }

  Mat tangent_frame(const Vec& y) const override {
    const auto [u, v] = project_params(y);
    Eigen::Vector3d su = chart_.dsigma_du(u, v);
    Eigen::Vector3d sv = chart_.dsigma_dv(u, v);
    Eigen::Vector3d t1 = su.normalized();
    Eigen::Vector3d t2 = (sv - sv.dot(t1) * t1).normalized();
    Mat frame(3, 2);
    frame.col(0) = t1;
    frame.col(1) = t2;
    return frame;
  }

  std::optional<Vec> surface_point(double u, double v) const override {
    return chart_.sigma(u, v);
  }

 private:
  void build_seeds(int n) {
    const int nu = std::max(4, n / 2), nv = std::max(6, n);
    std::vector<std::vector<int>> ring(nu - 1);
    for (int i = 1; i < nu; ++i) {
      for (int j = 0; j < nv; ++j) {
        const double u = M_PI * i / nu, v = kTwoPi * j / nv;
        ring[i - 1].push_back(static_cast<int>(seed_nodes_.size()));
        seed_nodes_.push_back(chart_.sigma(u, v));
        seed_params_.emplace_back(u, v);
      }
    }
    const int top = static_cast<int>(seed_nodes_.size());
    seed_nodes_.push_back(chart_.sigma(0.0, 0.0));
    seed_params_.emplace_back(0.0, 0.0);
    const int bottom = top + 1;
    seed_nodes_.push_back(chart_.sigma(M_PI, 0.0));
    seed_params_.emplace_back(M_PI, 0.0);
    for (int j = 0; j < nv; ++j) {
      const int jn = (j + 1) % nv;
      seed_faces_.push_back({top, ring[0][j], ring[0][jn]});
      seed_faces_.push_back({bottom, ring[nu - 2][jn], ring[nu - 2][j]});
    }
    for (int i = 0; i + 1 < nu - 1; ++i) {
      for (int j = 0; j < nv; ++j) {
        const int jn = (j + 1) % nv;
        seed_faces_.push_back({ring[i][j], ring[i + 1][j], ring[i + 1][jn]});
        seed_faces_.push_back({ring[i][j], ring[i + 1][jn], ring[i][jn]});
      }
    }
  }

  Eigen::Vector3d normal_at(double u, double v) const {
    return orient_ * Eigen::Vector3d(chart_.dsigma_du(u, v))
                         .cross(Eigen::Vector3d(chart_.dsigma_dv(u, v)))
                         .normalized();
  }

  std::pair<double, double> project_params(const Vec& x) const {
    int best = 0;
    double best_d = (x - seed_nodes_[0]).squaredNorm();
    for (int i = 1; i < static_cast<int>(seed_nodes_.size()); ++i) {
      const double d = (x - seed_nodes_[i]).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    double u = seed_params_[best].first, v = seed_params_[best].second;
    for (int it = 0; it < kProjectionMaxIter; ++it) {
      const Eigen::Vector3d g = chart_.sigma(u, v);
      Eigen::Matrix<double, 3, 2> J;
      J.col(0) = chart_.dsigma_du(u, v);
      J.col(1) = chart_.dsigma_dv(u, v);
      const Eigen::Vector3d res = Eigen::Vector3d(x) - g;
      // Levenberg damping keeps the v-direction quiet at the chart poles,
      // where dsigma_dv degenerates.
      Eigen::Matrix2d normal = J.transpose() * J;
      const double damping = 1e-10 * (1.0 + normal.trace());
      normal += damping * Eigen::Matrix2d::Identity();
      const Eigen::Vector2d step = normal.ldlt().solve(J.transpose() * res);
      u = std::clamp(u + step(0), 0.0, M_PI);
      v += step(1);
      if ((J * step).norm() < kProjectionTol * std::max(1.0, x.norm()))
        return {u, v};
    }
    throw AmbiguousProjection("surface projection did not settle in 50 steps");
  }

  SurfaceChart chart_;
  std::vector<Vec> seed_nodes_;
  std::vector<std::pair<double, double>> seed_params_;
  std::vector<std::array<int, 3>> seed_faces_;
  double orient_ = 1.0;
};

}  // namespace

Vec ReferenceManifold::embed(const TubularPoint& p,
                             const TubularRegion* region) const {
  check_region(p.r, region);
  return p.y + p.r * outward_normal(p.y);
}

ManifoldPtr make_unit_circle() { return std::make_shared<RadialManifold>(2); }

ManifoldPtr make_unit_sphere() { return std::make_shared<RadialManifold>(3); }

ManifoldPtr make_parameterized_curve(CurveChart chart, int seed_samples) {
  return std::make_shared<ParamCurveManifold>(std::move(chart), seed_samples);
}

ManifoldPtr make_parameterized_surface(SurfaceChart chart, int seed_samples) {
  return std::make_shared<ParamSurfaceManifold>(std::move(chart), seed_samples);
}

}  // namespace pitchfork::geometry
