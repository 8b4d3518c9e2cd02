#include "pitchfork/dynsys.hpp"

#include <cmath>
#include <random>

#include "pitchfork/rootfind.hpp"

namespace pitchfork::dynsys {

namespace {

constexpr double kTubeTol = 1e-9;

using geometry::ManifoldKind;
using geometry::TubularPoint;

bool radially_projected(const geometry::ReferenceManifold& m) {
  return m.kind() == ManifoldKind::Circle || m.kind() == ManifoldKind::Sphere;
}

Vec random_base_point(const geometry::ReferenceManifold& m,
                      std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (m.kind() == ManifoldKind::ParamCurve)
    return *m.curve_point(m.curve_period() * unif(rng));
  if (m.kind() == ManifoldKind::ParamSurface) {
    const double u = std::acos(1.0 - 2.0 * unif(rng));
    return *m.surface_point(u, 2.0 * M_PI * unif(rng));
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec x(m.ambient_dim());
  do {
    for (int i = 0; i < x.size(); ++i) x(i) = gauss(rng);
  } while (x.norm() < 1e-6);
  return x / x.norm();
}

/// Tubular Jacobian blocks from an ambient Jacobian, for radially
/// projected manifolds (embed scale 1 + r, normal = unit position).
void blocks_from_ambient(const geometry::ReferenceManifold& man,
                         const TubularPoint& in, const TubularPoint& out,
                         const Mat& jac, ComponentEval& ev) {
  const Vec n_in = man.outward_normal(in.y);
  const Mat t_in = man.tangent_frame(in.y);
  const Vec n_out = man.outward_normal(out.y);
  const Mat t_out = man.tangent_frame(out.y);
  const double scale_in = 1.0 + in.r;
  const double rho_out = 1.0 + out.r;
  ev.Drf = n_out.dot(jac * n_in);
  ev.Dyf = scale_in * (n_out.transpose() * jac * t_in);
  ev.Drg = (t_out.transpose() * (jac * n_in)) / rho_out;
  ev.Dyg = (scale_in / rho_out) * (t_out.transpose() * jac * t_in);
}

/// Finite-difference tubular blocks; works on any manifold.
void blocks_by_differences(const geometry::ReferenceManifold& man,
                           const std::function<Vec(const Vec&)>& map_at,
                           const TubularPoint& in, const TubularPoint& out,
                           double h, ComponentEval& ev) {
  const int k = man.intrinsic_dim();
  const Mat t_in = man.tangent_frame(in.y);
  const Mat t_out = man.tangent_frame(out.y);
  auto split = [&](const Vec& x) { return man.project(map_at(x)); };

  const TubularPoint rp = split(man.embed({in.r + h, in.y}));
  const TubularPoint rm = split(man.embed({in.r - h, in.y}));
  ev.Drf = (rp.r - rm.r) / (2.0 * h);
  ev.Drg = t_out.transpose() * (rp.y - rm.y) / (2.0 * h);

  ev.Dyf.resize(k);
  ev.Dyg.resize(k, k);
  for (int j = 0; j < k; ++j) {
    const Vec yp = man.step_on_manifold(in.y, h * t_in.col(j));
    const Vec ym = man.step_on_manifold(in.y, -h * t_in.col(j));
    const double denom = (yp - ym).norm();
    const TubularPoint fp = split(man.embed({in.r, yp}));
    const TubularPoint fm = split(man.embed({in.r, ym}));
    ev.Dyf(j) = (fp.r - fm.r) / denom;
    ev.Dyg.col(j) = t_out.transpose() * (fp.y - fm.y) / denom;
  }
}

}  // namespace

Vec MapFamily::apply(const Vec& x, double mu) const { return forward(x, mu); }

Vec MapFamily::apply_inverse(const Vec& x, double mu) const {
  if (model) {
    const double rho = x.norm();
    const double s = model->q_inverse(rho, mu);
    return (model->rotation.transpose() * x) * (s / rho);
  }
  if (inverse) return (*inverse)(x, mu);
  // damped Newton on the forward map, seeded at the point itself
  Vec w = x;
  Vec res = forward(w, mu) - x;
  std::vector<double> trace{res.norm()};
  for (int it = 0; it < 100; ++it) {
    if (res.norm() <= 1e-11) return w;
    const Mat jac = jacobian_at(w, mu);
    const Vec step = jac.partialPivLu().solve(-res);
    double lambda = 1.0;
    for (int bt = 0; bt < 8; ++bt) {
      const Vec w_try = w + lambda * step;
      const Vec res_try = forward(w_try, mu) - x;
      if (res_try.norm() < res.norm()) {
        w = w_try;
        res = res_try;
        break;
      }
      lambda *= 0.5;
      if (bt == 7)
        throw NewtonDivergence("numeric inverse: line search failed", trace);
    }
    trace.push_back(res.norm());
  }
  throw NewtonDivergence("numeric inverse: no convergence in 100 steps",
                         trace);
}

Mat MapFamily::jacobian_at(const Vec& x, double mu) const {
  if (jacobian) return (*jacobian)(x, mu);
  const int m = static_cast<int>(x.size());
  Mat j(m, m);
  for (int i = 0; i < m; ++i) {
    Vec xp = x, xm = x;
    xp(i) += fd_step;
    xm(i) -= fd_step;
    j.col(i) = (forward(xp, mu) - forward(xm, mu)) / (2.0 * fd_step);
  }
  return j;
}

double MapFamily::f_component(double r, const Vec& y, double mu) const {
  if (model) return model->q(1.0 + r, mu) - 1.0;
  return manifold->project(forward(manifold->embed({r, y}), mu)).r;
}

Vec MapFamily::inverse_base(double r, const Vec& z, double mu) const {
  if (model) {
    const Vec base = model->rotation.transpose() * z;
    return base / base.norm();
  }
  return manifold->project(apply_inverse(manifold->embed({r, z}), mu)).y;
}

ComponentEval split_components(const MapFamily& F, const TubularPoint& p,
                               double mu, double alpha) {
  const auto& man = *F.manifold;
  const Vec x = man.embed(p);
  const Vec fx = F.apply(x, mu);
  const TubularPoint out = man.project(fx);
  if (std::abs(out.r) > alpha + kTubeTol)
    throw LeftTube("split_components: image offset " + std::to_string(out.r) +
                   " left N(" + std::to_string(alpha) + ")");
  ComponentEval ev;
  ev.f = out.r;
  ev.g = out.y;
  const int k = man.intrinsic_dim();
  if (F.model) {
    ev.Drf = F.model->dq(1.0 + p.r, mu);
    ev.Dyf = RowVec::Zero(k);
    ev.Drg = Vec::Zero(k);
    const Mat t_in = man.tangent_frame(p.y);
    const Mat t_out = man.tangent_frame(out.y);
    ev.Dyg = t_out.transpose() * F.model->rotation * t_in;
  } else if (F.jacobian && radially_projected(man)) {
    blocks_from_ambient(man, p, out, (*F.jacobian)(x, mu), ev);
  } else {
    blocks_by_differences(
        man, [&](const Vec& q) { return F.apply(q, mu); }, p, out, F.fd_step,
        ev);
  }
  return ev;
}

ComponentEval inverse_components(const MapFamily& F, const TubularPoint& p,
                                 double mu, double alpha) {
  // preimages of tube points may sit slightly outside N(alpha) when the
  // forward map contracts the tube strictly; no exit check here
  (void)alpha;
  const auto& man = *F.manifold;
  ComponentEval ev;
  const int k = man.intrinsic_dim();
  if (F.model) {
    const double s = F.model->q_inverse(1.0 + p.r, mu);
    ev.f = s - 1.0;
    Vec base = F.model->rotation.transpose() * p.y;
    ev.g = base / base.norm();
    ev.Drf = 1.0 / F.model->dq(s, mu);
    ev.Dyf = RowVec::Zero(k);
    ev.Drg = Vec::Zero(k);
    const Mat t_in = man.tangent_frame(p.y);
    const Mat t_out = man.tangent_frame(ev.g);
    ev.Dyg = t_out.transpose() * F.model->rotation.transpose() * t_in;
    return ev;
  }
  const Vec x = man.embed(p);
  const Vec ix = F.apply_inverse(x, mu);
  const TubularPoint out = man.project(ix);
  ev.f = out.r;
  ev.g = out.y;
  if ((F.inverse_jacobian || F.jacobian) && radially_projected(man)) {
    const Mat jinv = F.inverse_jacobian
                         ? (*F.inverse_jacobian)(x, mu)
                         : Mat(F.jacobian_at(ix, mu).partialPivLu().inverse());
    blocks_from_ambient(man, p, out, jinv, ev);
  } else {
    blocks_by_differences(
        man, [&](const Vec& q) { return F.apply_inverse(q, mu); }, p, out,
        F.fd_step, ev);
  }
  return ev;
}

SideClassification classify_side_behavior(const MapFamily& F, double mu,
                                          int samples, double alpha,
                                          std::uint64_t seed) {
  if (samples < 1) throw Error("classify_side_behavior: samples >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  const auto& man = *F.manifold;
  SideClassification cls;
  cls.samples = samples;
  int inner_count = 0, outer_count = 0;
  Vec stay_witness, cross_witness;
  for (int i = 0; i < samples; ++i) {
    const Vec y = random_base_point(man, rng);
    const double r = -alpha * unif(rng);
    const Vec x = man.embed({r, y});
    const double r_image = man.project(F.apply(x, mu)).r;
    if (r_image < 0.0) {
      ++inner_count;
      stay_witness = x;
    } else {
      ++outer_count;
      cross_witness = x;
    }
  }
  if (inner_count == samples) {
    cls.behavior = SideBehavior::Preserving;
  } else if (outer_count == samples) {
    cls.behavior = SideBehavior::Reversing;
  } else {
    cls.behavior = SideBehavior::Mixed;
    cls.mixed_witness = std::make_pair(stay_witness, cross_witness);
  }
  return cls;
}

MapFamily canonical_family(int ambient_dim, const Mat& rotation,
                           double mu_cap) {
  if (rotation.rows() != ambient_dim || rotation.cols() != ambient_dim)
    throw NotRotation("canonical_family: matrix size mismatch");
  const Mat gram = rotation.transpose() * rotation;
  if ((gram - Mat::Identity(ambient_dim, ambient_dim)).norm() > 1e-12)
    throw NotRotation("canonical_family: matrix is not orthogonal");
  if (std::abs(rotation.determinant() - 1.0) > 1e-10)
    throw NotRotation("canonical_family: determinant is not +1");
  if (ambient_dim != 2 && ambient_dim != 3)
    throw UnsupportedManifold("canonical_family: ambient dim must be 2 or 3");

  MapFamily fam;
  fam.name = "canonical";
  fam.manifold = ambient_dim == 2 ? geometry::make_unit_circle()
                                  : geometry::make_unit_sphere();
  fam.mu_range = MuRange{mu_cap};
  const Mat rot = rotation;
  fam.forward = [rot](const Vec& x, double mu) {
    const SigmaProfile sigma(mu);
    return Vec(sigma.value(x.norm()) * (rot * x));
  };
  fam.inverse = [rot](const Vec& x, double mu) {
    const SigmaProfile sigma(mu);
    const double rho = x.norm();
    const double s = sigma.radial_inverse(rho);
    return Vec((rot.transpose() * x) * (s / rho));
  };
  fam.jacobian = [rot](const Vec& x, double mu) {
    const SigmaProfile sigma(mu);
    const double rho = x.norm();
    const Vec xhat = x / rho;
    return Mat(sigma.deriv(rho) * (rot * x) * xhat.transpose() +
               sigma.value(rho) * rot);
  };
  RadialRotationModel model;
  model.q = [](double s, double mu) { return SigmaProfile(mu).radial(s); };
  model.dq = [](double s, double mu) {
    return SigmaProfile(mu).radial_deriv(s);
  };
  model.q_inverse = [](double rho, double mu) {
    return SigmaProfile(mu).radial_inverse(rho);
  };
  model.rotation = rot;
  fam.model = std::move(model);
  return fam;
}

MapFamily side_reversing_wrap(const MapFamily& F) {
  if (!F.model)
    throw UnsupportedManifold(
        "side_reversing_wrap: needs a radial-rotation family");
  MapFamily g;
  g.name = F.name + "-reversing";
  g.manifold = F.manifold;
  g.mu_range = F.mu_range;
  const MapFamily base = F;
  auto reflect = [](const Vec& x) {
    const double rho = x.norm();
    return Vec(x * ((2.0 - rho) / rho));
  };
  g.forward = [base, reflect](const Vec& x, double mu) {
    return reflect(base.forward(x, mu));
  };
  g.inverse = [base, reflect](const Vec& x, double mu) {
    return base.apply_inverse(reflect(x), mu);
  };
  g.jacobian = [base](const Vec& x, double mu) {
    const Vec fx = base.forward(x, mu);
    const double rho = fx.norm();
    const Vec xhat = fx / rho;
    const Mat dr = ((2.0 - rho) / rho) *
                       Mat::Identity(fx.size(), fx.size()) -
                   (2.0 / rho) * xhat * xhat.transpose();
    return Mat(dr * base.jacobian_at(x, mu));
  };
  RadialRotationModel model;
  const auto fq = F.model->q;
  const auto fdq = F.model->dq;
  model.q = [fq](double s, double mu) { return 2.0 - fq(s, mu); };
  model.dq = [fdq](double s, double mu) { return -fdq(s, mu); };
  model.q_inverse = [fq, fdq](double rho, double mu) {
    return solve_monotone([&](double s) { return 2.0 - fq(s, mu); },
                          [&](double s) { return -fdq(s, mu); }, rho, 0.25,
                          2.0);
  };
  model.rotation = F.model->rotation;
  g.model = std::move(model);
  return g;
}

MapFamily compose(const MapFamily& outer, const MapFamily& inner) {
  MapFamily c;
  c.name = outer.name + "*" + inner.name;
  c.manifold = inner.manifold;
  c.mu_range = MuRange{std::min(outer.mu_range.a, inner.mu_range.a)};
  const MapFamily o = outer, i = inner;
  c.forward = [o, i](const Vec& x, double mu) {
    return o.forward(i.forward(x, mu), mu);
  };
  c.inverse = [o, i](const Vec& x, double mu) {
    return i.apply_inverse(o.apply_inverse(x, mu), mu);
  };
  c.jacobian = [o, i](const Vec& x, double mu) {
    const Vec mid = i.forward(x, mu);
    return Mat(o.jacobian_at(mid, mu) * i.jacobian_at(x, mu));
  };
  if (o.model && i.model && o.manifold == i.manifold) {
    RadialRotationModel model;
    const auto oq = o.model->q, odq = o.model->dq, iq = i.model->q,
               idq = i.model->dq;
    const auto oqi = o.model->q_inverse, iqi = i.model->q_inverse;
    model.q = [oq, iq](double s, double mu) { return oq(iq(s, mu), mu); };
    model.dq = [odq, iq, idq](double s, double mu) {
      return odq(iq(s, mu), mu) * idq(s, mu);
    };
    model.q_inverse = [oqi, iqi](double rho, double mu) {
      return iqi(oqi(rho, mu), mu);
    };
    model.rotation = o.model->rotation * i.model->rotation;
    c.model = std::move(model);
  }
  return c;
}

MapFamily identity_family(const geometry::ManifoldPtr& manifold) {
  MapFamily fam;
  fam.name = "identity";
  fam.manifold = manifold;
  fam.forward = [](const Vec& x, double) { return x; };
  fam.inverse = fam.forward;
  fam.jacobian = [](const Vec& x, double) {
    return Mat(Mat::Identity(x.size(), x.size()));
  };
  if (radially_projected(*manifold)) {
    RadialRotationModel model;
    model.q = [](double s, double) { return s; };
    model.dq = [](double, double) { return 1.0; };
    model.q_inverse = [](double rho, double) { return rho; };
    model.rotation = Mat::Identity(manifold->ambient_dim(),
                                   manifold->ambient_dim());
    fam.model = std::move(model);
  }
  return fam;
}

double invariance_defect(const MapFamily& F, const geometry::ManifoldMesh& mesh,
                         double mu) {
  double worst = 0.0;
  for (const auto& y : mesh.nodes)
    worst = std::max(worst,
                     std::abs(F.manifold->project(F.apply(y, mu)).r));
  return worst;
}

double inverse_defect(const MapFamily& F, double mu, double alpha, int samples,
                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const Vec y = random_base_point(*F.manifold, rng);
    const double r = alpha * unif(rng);
    const Vec x = F.manifold->embed({r, y});
    worst = std::max(worst,
                     (F.apply_inverse(F.apply(x, mu), mu) - x).norm());
  }
  return worst;
}

Mat rotation2d(double angle) {
  Mat rot(2, 2);
  rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return rot;
}

Mat rotation3d(const Vec& axis, double angle) {
  const Eigen::Vector3d u = Eigen::Vector3d(axis).normalized();
  return Mat(Eigen::AngleAxisd(angle, u).toRotationMatrix());
}

}  // namespace pitchfork::dynsys
