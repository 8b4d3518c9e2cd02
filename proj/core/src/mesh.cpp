#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "json.hpp"
#include "pitchfork/geometry.hpp"

namespace pitchfork::geometry {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

Vec vec3(double x, double y, double z) {
  Vec v(3);
  v << x, y, z;
  return v;
}

/// Tridiagonal solve (Thomas), constant coefficients except the two ends.
Vec thomas(double b_first, double b_mid, double b_last, const Vec& d) {
  const int n = static_cast<int>(d.size());
  Vec c_prime(n), d_prime(n);
  auto diag = [&](int i) {
    return i == 0 ? b_first : (i == n - 1 ? b_last : b_mid);
  };
  c_prime(0) = 1.0 / diag(0);
  d_prime(0) = d(0) / diag(0);
  for (int i = 1; i < n; ++i) {
    const double m = diag(i) - c_prime(i - 1);
    c_prime(i) = 1.0 / m;
    d_prime(i) = (d(i) - d_prime(i - 1)) / m;
  }
  Vec x(n);
  x(n - 1) = d_prime(n - 1);
  for (int i = n - 2; i >= 0; --i) x(i) = d_prime(i) - c_prime(i) * x(i + 1);
  return x;
}

/// Cyclic tridiagonal solve for the periodic spline system
/// (diag 4, off-diagonals 1, unit corners), via Sherman-Morrison.
Vec cyclic_spline_solve(const Vec& d) {
  const int n = static_cast<int>(d.size());
  const double gamma = -4.0;
  const double b_first = 4.0 - gamma;
  const double b_last = 4.0 - 1.0 / gamma;
  Vec u = Vec::Zero(n);
  u(0) = gamma;
  u(n - 1) = 1.0;
  const Vec y1 = thomas(b_first, 4.0, b_last, d);
  const Vec y2 = thomas(b_first, 4.0, b_last, u);
  const double vy1 = y1(0) + y1(n - 1) / gamma;
  const double vy2 = y2(0) + y2(n - 1) / gamma;
  return y1 - y2 * (vy1 / (1.0 + vy2));
}

struct IcoBuilder {
  std::vector<Eigen::Vector3d> verts;
  std::vector<std::array<int, 3>> faces;
  std::map<std::pair<int, int>, int> midpoint_cache;

  void init() {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    const double raw[12][3] = {{-1, t, 0},  {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                               {0, -1, t},  {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                               {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
    for (auto& rv : raw)
      verts.push_back(Eigen::Vector3d(rv[0], rv[1], rv[2]).normalized());
    faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  }

  int midpoint(int a, int b) {
    const auto key = std::minmax(a, b);
    auto it = midpoint_cache.find(key);
    if (it != midpoint_cache.end()) return it->second;
    const int idx = static_cast<int>(verts.size());
    verts.push_back((verts[a] + verts[b]).normalized());
    midpoint_cache.emplace(key, idx);
    return idx;
  }

  void subdivide() {
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = midpoint(f[0], f[1]);
      const int bc = midpoint(f[1], f[2]);
      const int ca = midpoint(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
};

MeshPtr build_ring_mesh(const ManifoldPtr& manifold, int n) {
  auto mesh = std::make_shared<ManifoldMesh>();
  mesh->manifold = manifold;
  mesh->scheme = ManifoldMesh::Scheme::PeriodicCubic;
  const double period = manifold->curve_period();
  for (int k = 0; k < n; ++k) {
    const double t = period * k / n;
    const auto node = manifold->curve_point(t);
    if (!node)
      throw UnsupportedManifold("build_mesh: manifold has no curve chart");
    mesh->nodes.push_back(*node);
    mesh->edges.push_back({k, (k + 1) % n});
    mesh->node_params.push_back(t);
  }
  return mesh;
}

MeshPtr build_param_surface_mesh(const ManifoldPtr& manifold, int resolution) {
  // (nu - 1) interior rings of nv nodes plus two pole nodes
  int nv = std::max(6, static_cast<int>(std::ceil(std::sqrt(2.0 * resolution))));
  int nu = std::max(3, (resolution - 2 + nv - 1) / nv + 1);
  while ((nu - 1) * nv + 2 < resolution) ++nu;
  auto mesh = std::make_shared<ManifoldMesh>();
  mesh->manifold = manifold;
  mesh->scheme = ManifoldMesh::Scheme::BarycentricLinear;
  std::vector<std::vector<int>> ring(nu - 1);
  auto at = [&](double u, double v) {
    const auto node = manifold->surface_point(u, v);
    if (!node)
      throw UnsupportedManifold("build_mesh: manifold has no surface chart");
    return *node;
  };
  for (int i = 1; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      ring[i - 1].push_back(mesh->node_count());
      mesh->nodes.push_back(at(M_PI * i / nu, kTwoPi * j / nv));
    }
  }
  const int top = mesh->node_count();
  mesh->nodes.push_back(at(0.0, 0.0));
  const int bottom = mesh->node_count();
  mesh->nodes.push_back(at(M_PI, 0.0));
  for (int j = 0; j < nv; ++j) {
    const int jn = (j + 1) % nv;
    mesh->faces.push_back({top, ring[0][j], ring[0][jn]});
    mesh->faces.push_back({bottom, ring[nu - 2][jn], ring[nu - 2][j]});
  }
  for (int i = 0; i + 1 < nu - 1; ++i) {
    for (int j = 0; j < nv; ++j) {
      const int jn = (j + 1) % nv;
      mesh->faces.push_back({ring[i][j], ring[i + 1][j], ring[i + 1][jn]});
      mesh->faces.push_back({ring[i][j], ring[i + 1][jn], ring[i][jn]});
    }
  }
  mesh->build_face_neighbors();
  return mesh;
}

MeshPtr build_sphere_mesh(const ManifoldPtr& manifold, int resolution) {
  int subdivisions = 1;
  while (10 * (1 << (2 * subdivisions)) + 2 < resolution) ++subdivisions;
  IcoBuilder ico;
  ico.init();
  for (int s = 0; s < subdivisions; ++s) ico.subdivide();
  auto mesh = std::make_shared<ManifoldMesh>();
  mesh->manifold = manifold;
  mesh->scheme = ManifoldMesh::Scheme::BarycentricLinear;
  for (const auto& v : ico.verts) mesh->nodes.push_back(vec3(v(0), v(1), v(2)));
  mesh->faces = std::move(ico.faces);
  mesh->build_face_neighbors();
  return mesh;
}

}  // namespace

void ManifoldMesh::build_face_neighbors() {
  face_neighbors.assign(faces.size(), {-1, -1, -1});
  std::map<std::pair<int, int>, std::pair<int, int>> edge_to_face;
  for (int fi = 0; fi < static_cast<int>(faces.size()); ++fi) {
    for (int e = 0; e < 3; ++e) {
      // edge opposite vertex e
      const int a = faces[fi][(e + 1) % 3];
      const int b = faces[fi][(e + 2) % 3];
      const auto key = std::minmax(a, b);
      auto it = edge_to_face.find(key);
      if (it == edge_to_face.end()) {
        edge_to_face.emplace(key, std::make_pair(fi, e));
      } else {
        face_neighbors[fi][e] = it->second.first;
        face_neighbors[it->second.first][it->second.second] = fi;
      }
    }
  }
}

bool ManifoldMesh::is_closed() const {
  if (scheme == Scheme::PeriodicCubic) {
    if (edges.size() != nodes.size() || nodes.empty()) return false;
    std::vector<int> degree(nodes.size(), 0);
    for (const auto& e : edges) {
      ++degree[e[0]];
      ++degree[e[1]];
    }
    for (int d : degree)
      if (d != 2) return false;
    // single cycle: walk the ring
    std::vector<std::vector<int>> nbr(nodes.size());
    for (const auto& e : edges) {
      nbr[e[0]].push_back(e[1]);
      nbr[e[1]].push_back(e[0]);
    }
    std::vector<bool> seen(nodes.size(), false);
    int cur = 0, prev = -1, count = 0;
    while (!seen[cur]) {
      seen[cur] = true;
      ++count;
      const int nxt = (nbr[cur][0] != prev) ? nbr[cur][0] : nbr[cur][1];
      prev = cur;
      cur = nxt;
    }
    return count == static_cast<int>(nodes.size());
  }
  if (faces.empty()) return false;
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& f : faces) {
    for (int e = 0; e < 3; ++e) {
      const auto key = std::minmax(f[e], f[(e + 1) % 3]);
      ++edge_count[key];
    }
  }
  for (const auto& [key, count] : edge_count)
    if (count != 2) return false;
  return true;
}

double ManifoldMesh::node_residual() const {
  double worst = 0.0;
  for (const auto& node : nodes)
    worst = std::max(worst, std::abs(manifold->project(node).r));
  return worst;
}

std::vector<std::vector<int>> ManifoldMesh::adjacency() const {
  std::vector<std::set<int>> nbr(nodes.size());
  if (scheme == Scheme::PeriodicCubic) {
    for (const auto& e : edges) {
      nbr[e[0]].insert(e[1]);
      nbr[e[1]].insert(e[0]);
    }
  } else {
    for (const auto& f : faces) {
      for (int e = 0; e < 3; ++e) {
        nbr[f[e]].insert(f[(e + 1) % 3]);
        nbr[f[(e + 1) % 3]].insert(f[e]);
      }
    }
  }
  std::vector<std::vector<int>> out(nodes.size());
  for (size_t i = 0; i < nbr.size(); ++i)
    out[i].assign(nbr[i].begin(), nbr[i].end());
  return out;
}

MeshPtr build_mesh(const ManifoldPtr& manifold, int resolution) {
  switch (manifold->kind()) {
    case ManifoldKind::Circle:
    case ManifoldKind::ParamCurve:
      if (resolution < 8)
        throw Error("build_mesh: curve resolution must be >= 8");
      return build_ring_mesh(manifold, resolution);
    case ManifoldKind::Sphere:
      if (resolution < 42)
        throw Error("build_mesh: sphere resolution must be >= 42");
      return build_sphere_mesh(manifold, resolution);
    case ManifoldKind::ParamSurface:
      if (resolution < 42)
        throw Error("build_mesh: surface resolution must be >= 42");
      return build_param_surface_mesh(manifold, resolution);
  }
  throw UnsupportedManifold("build_mesh: unknown manifold kind");
}

std::string mesh_to_json(const ManifoldMesh& mesh) {
  nlohmann::json j;
  j["scheme"] = mesh.scheme == ManifoldMesh::Scheme::PeriodicCubic
                    ? "periodic-cubic"
                    : "barycentric-linear";
  auto& nodes = j["nodes"];
  nodes = nlohmann::json::array();
  for (const auto& n : mesh.nodes) {
    nlohmann::json row = nlohmann::json::array();
    for (int i = 0; i < n.size(); ++i) row.push_back(n(i));
    nodes.push_back(row);
  }
  if (mesh.scheme == ManifoldMesh::Scheme::PeriodicCubic) {
    auto& edges = j["edges"];
    edges = nlohmann::json::array();
    for (const auto& e : mesh.edges) edges.push_back({e[0], e[1]});
    j["params"] = mesh.node_params;
  } else {
    auto& faces = j["faces"];
    faces = nlohmann::json::array();
    for (const auto& f : mesh.faces) faces.push_back({f[0], f[1], f[2]});
  }
  return j.dump(2);
}

MeshPtr mesh_from_json(const std::string& text, const ManifoldPtr& manifold) {
  nlohmann::json j = nlohmann::json::parse(text);
  auto mesh = std::make_shared<ManifoldMesh>();
  mesh->manifold = manifold;
  const std::string scheme = j.at("scheme").get<std::string>();
  if (scheme == "periodic-cubic")
    mesh->scheme = ManifoldMesh::Scheme::PeriodicCubic;
  else if (scheme == "barycentric-linear")
    mesh->scheme = ManifoldMesh::Scheme::BarycentricLinear;
  else
    throw Error("mesh_from_json: unknown scheme " + scheme);
  for (const auto& row : j.at("nodes")) {
    Vec n(row.size());
    for (size_t i = 0; i < row.size(); ++i) n(i) = row[i].get<double>();
    if (n.size() != manifold->ambient_dim())
      throw Error("mesh_from_json: node dimension mismatch");
    mesh->nodes.push_back(n);
  }
  if (mesh->scheme == ManifoldMesh::Scheme::PeriodicCubic) {
    for (const auto& row : j.at("edges"))
      mesh->edges.push_back({row[0].get<int>(), row[1].get<int>()});
    mesh->node_params = j.at("params").get<std::vector<double>>();
    // the interpolant assumes uniformly spaced ascending chart parameters
    const int n = mesh->node_count();
    if (static_cast<int>(mesh->node_params.size()) != n)
      throw Error("mesh_from_json: params/nodes size mismatch");
    const double h = manifold->curve_period() / n;
    for (int k = 0; k < n; ++k)
      if (std::abs(mesh->node_params[k] - k * h) > 1e-9)
        throw Error("mesh_from_json: node params must be uniform ascending");
  } else {
    for (const auto& row : j.at("faces"))
      mesh->faces.push_back(
          {row[0].get<int>(), row[1].get<int>(), row[2].get<int>()});
    mesh->build_face_neighbors();
  }
  if (!mesh->is_closed()) throw Error("mesh_from_json: mesh is not closed");
  if (mesh->node_residual() > 1e-10)
    throw Error("mesh_from_json: nodes do not lie on the manifold");
  return mesh;
}

MeshField::MeshField(MeshPtr mesh, Vec values)
    : mesh_(std::move(mesh)), values_(std::move(values)) {
  if (values_.size() != mesh_->node_count())
    throw Error("MeshField: value count != node count");
  if (mesh_->scheme == ManifoldMesh::Scheme::PeriodicCubic) {
    const int n = mesh_->node_count();
    const double h = mesh_->manifold->curve_period() / n;
    Vec rhs(n);
    for (int i = 0; i < n; ++i) {
      const double prev = values_((i + n - 1) % n);
      const double next = values_((i + 1) % n);
      rhs(i) = 6.0 * (prev - 2.0 * values_(i) + next) / (h * h);
    }
    spline_m_ = cyclic_spline_solve(rhs);
  }
}

double MeshField::eval(const Vec& y) const {
  return mesh_->scheme == ManifoldMesh::Scheme::PeriodicCubic ? eval_circle(y)
                                                              : eval_sphere(y);
}

double MeshField::eval_circle(const Vec& y) const {
  const auto param = mesh_->manifold->curve_parameter(y);
  if (!param) throw Error("MeshField: no chart parameter for query point");
  const int n = mesh_->node_count();
  const double period = mesh_->manifold->curve_period();
  const double h = period / n;
  double theta = std::fmod(*param, period);
  if (theta < 0.0) theta += period;
  int k = static_cast<int>(theta / h);
  if (k >= n) k = n - 1;
  const double t = theta - k * h;
  const int k1 = (k + 1) % n;
  const double mk = spline_m_(k), mk1 = spline_m_(k1);
  const double yk = values_(k), yk1 = values_(k1);
  const double a = (h - t);
  return mk * a * a * a / (6.0 * h) + mk1 * t * t * t / (6.0 * h) +
         (yk / h - mk * h / 6.0) * a + (yk1 / h - mk1 * h / 6.0) * t;
}

double MeshField::eval_dparam(double theta) const {
  if (mesh_->scheme != ManifoldMesh::Scheme::PeriodicCubic)
    throw Error("MeshField::eval_dparam: periodic-cubic meshes only");
  const int n = mesh_->node_count();
  const double period = mesh_->manifold->curve_period();
  const double h = period / n;
  theta = std::fmod(theta, period);
  if (theta < 0.0) theta += period;
  int k = static_cast<int>(theta / h);
  if (k >= n) k = n - 1;
  const double t = theta - k * h;
  const int k1 = (k + 1) % n;
  const double mk = spline_m_(k), mk1 = spline_m_(k1);
  const double yk = values_(k), yk1 = values_(k1);
  const double a = (h - t);
  return -mk * a * a / (2.0 * h) + mk1 * t * t / (2.0 * h) -
         (yk / h - mk * h / 6.0) + (yk1 / h - mk1 * h / 6.0);
}

int MeshField::locate_face(const Vec& y, Eigen::Vector3d& lambda) const {
  const auto& mesh = *mesh_;
  auto barycentric = [&](int fi, Eigen::Vector3d& lam) {
    Eigen::Matrix3d m;
    m.col(0) = Eigen::Vector3d(mesh.nodes[mesh.faces[fi][0]]);
    m.col(1) = Eigen::Vector3d(mesh.nodes[mesh.faces[fi][1]]);
    m.col(2) = Eigen::Vector3d(mesh.nodes[mesh.faces[fi][2]]);
    lam = m.partialPivLu().solve(Eigen::Vector3d(y));
    const double s = lam.sum();
    if (std::abs(s) > 1e-14) lam /= s;
    return lam.minCoeff();
  };

  // nearest node, then its incident faces, then a neighbor walk
  int best_node = 0;
  double best_d = (y - mesh.nodes[0]).squaredNorm();
  for (int i = 1; i < mesh.node_count(); ++i) {
    const double d = (y - mesh.nodes[i]).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best_node = i;
    }
  }
  int start = -1;
  for (int fi = 0; fi < static_cast<int>(mesh.faces.size()); ++fi) {
    const auto& f = mesh.faces[fi];
    if (f[0] == best_node || f[1] == best_node || f[2] == best_node) {
      if (barycentric(fi, lambda) >= -1e-10) return fi;
      if (start < 0) start = fi;
    }
  }
  int cur = start;
  const int max_steps = 2 * static_cast<int>(mesh.faces.size());
  for (int step = 0; step < max_steps && cur >= 0; ++step) {
    const double worst = barycentric(cur, lambda);
    if (worst >= -1e-10) return cur;
    int drop = 0;
    for (int i = 1; i < 3; ++i)
      if (lambda(i) < lambda(drop)) drop = i;
    cur = mesh.face_neighbors[cur][drop];
  }
  // full scan fallback
  int best_face = -1;
  double best_worst = -1e9;
  Eigen::Vector3d lam;
  for (int fi = 0; fi < static_cast<int>(mesh.faces.size()); ++fi) {
    const double worst = barycentric(fi, lam);
    if (worst > best_worst) {
      best_worst = worst;
      best_face = fi;
      lambda = lam;
    }
  }
  if (best_worst < -1e-6)
    throw InterpolationOutOfRange("query point not covered by the mesh");
  return best_face;
}

double MeshField::eval_sphere(const Vec& y) const {
  Eigen::Vector3d lambda;
  const int fi = locate_face(y, lambda);
  const auto& f = mesh_->faces[fi];
  return lambda(0) * values_(f[0]) + lambda(1) * values_(f[1]) +
         lambda(2) * values_(f[2]);
}

std::vector<Vec> MeshField::node_gradients() const {
  if (mesh_->scheme != ManifoldMesh::Scheme::BarycentricLinear)
    throw Error("node_gradients: barycentric meshes only");
  const auto& mesh = *mesh_;
  std::vector<Eigen::Vector3d> acc(mesh.node_count(), Eigen::Vector3d::Zero());
  std::vector<double> weight(mesh.node_count(), 0.0);
  for (const auto& f : mesh.faces) {
    const Eigen::Vector3d p0 = mesh.nodes[f[0]];
    const Eigen::Vector3d e1 = Eigen::Vector3d(mesh.nodes[f[1]]) - p0;
    const Eigen::Vector3d e2 = Eigen::Vector3d(mesh.nodes[f[2]]) - p0;
    Eigen::Matrix<double, 3, 2> a;
    a.col(0) = e1;
    a.col(1) = e2;
    Eigen::Vector2d df(values_(f[1]) - values_(f[0]),
                       values_(f[2]) - values_(f[0]));
    const Eigen::Vector3d g = a * (a.transpose() * a).ldlt().solve(df);
    const double area = 0.5 * e1.cross(e2).norm();
    for (int v : f) {
      acc[v] += area * g;
      weight[v] += area;
    }
  }
  std::vector<Vec> out(mesh.node_count());
  for (int i = 0; i < mesh.node_count(); ++i)
    out[i] = Vec(acc[i] / std::max(weight[i], 1e-300));
  return out;
}

}  // namespace pitchfork::geometry
