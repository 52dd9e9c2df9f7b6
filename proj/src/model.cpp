#include "fracture/model.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "fracture/errors.hpp"

namespace fracture {

const std::vector<QuadPoint>& triangle_rule(int points) {
  static const std::vector<QuadPoint> r1 = {{{1.0 / 3, 1.0 / 3, 1.0 / 3}, 1.0}};
  static const std::vector<QuadPoint> r3 = {{{2.0 / 3, 1.0 / 6, 1.0 / 6}, 1.0 / 3},
                                            {{1.0 / 6, 2.0 / 3, 1.0 / 6}, 1.0 / 3},
                                            {{1.0 / 6, 1.0 / 6, 2.0 / 3}, 1.0 / 3}};
  static const std::vector<QuadPoint> r6 = [] {
    const double a1 = 0.445948490915965, b1 = 1 - 2 * a1, w1 = 0.223381589678011;
    const double a2 = 0.091576213509771, b2 = 1 - 2 * a2, w2 = 0.109951743655322;
    return std::vector<QuadPoint>{{{b1, a1, a1}, w1}, {{a1, b1, a1}, w1}, {{a1, a1, b1}, w1},
                                  {{b2, a2, a2}, w2}, {{a2, b2, a2}, w2}, {{a2, a2, b2}, w2}};
  }();
  static const std::vector<QuadPoint> r7 = [] {
    const double a1 = 0.470142064105115, b1 = 1 - 2 * a1, w1 = 0.132394152788506;
    const double a2 = 0.101286507323456, b2 = 1 - 2 * a2, w2 = 0.125939180544827;
    return std::vector<QuadPoint>{{{1.0 / 3, 1.0 / 3, 1.0 / 3}, 0.225},
                                  {{b1, a1, a1}, w1}, {{a1, b1, a1}, w1}, {{a1, a1, b1}, w1},
                                  {{b2, a2, a2}, w2}, {{a2, b2, a2}, w2}, {{a2, a2, b2}, w2}};
  }();
  switch (points) {
    case 1: return r1;
    case 3: return r3;
    case 6: return r6;
    case 7: return r7;
    default: throw Error("unsupported triangle quadrature: " + std::to_string(points) + " points");
  }
}

const std::array<std::pair<double, double>, 2>& edge_rule() {
  static const double h = 0.5 / std::sqrt(3.0);
  static const std::array<std::pair<double, double>, 2> rule = {{{0.5 - h, 0.5}, {0.5 + h, 0.5}}};
  return rule;
}

double BulkDensity::W(const Mat2& xi) const {
  switch (variant) {
    case BulkVariant::Quadratic: return mu * xi.squaredNorm();
    case BulkVariant::PNorm: return mu * std::pow(xi.norm(), p);
    case BulkVariant::Custom: return custom_w(xi);
  }
  return 0;
}

Mat2 BulkDensity::dW(const Mat2& xi) const {
  switch (variant) {
    case BulkVariant::Quadratic: return 2 * mu * xi;
    case BulkVariant::PNorm: {
      double n2 = xi.squaredNorm();
      if (n2 == 0.0) return Mat2::Zero();
      return p * mu * std::pow(n2, 0.5 * (p - 2)) * xi;
    }
    case BulkVariant::Custom: {
      if (custom_dw) return custom_dw(xi);
      Mat2 g;
      const double h = 1e-6;
      for (int i = 0; i < 4; ++i) {
        Mat2 e = Mat2::Zero();
        e(i / 2, i % 2) = h;
        g(i / 2, i % 2) = (custom_w(xi + e) - custom_w(xi - e)) / (2 * h);
      }
      return g;
    }
  }
  return Mat2::Zero();
}

Eigen::Matrix4d BulkDensity::d2W(const Mat2& xi) const {
  Eigen::Matrix4d H = Eigen::Matrix4d::Zero();
  if (variant == BulkVariant::Quadratic) return 2 * mu * Eigen::Matrix4d::Identity();
  if (variant == BulkVariant::PNorm) {
    double n2 = xi.squaredNorm() + 1e-24;
    Eigen::Vector4d v(xi(0, 0), xi(0, 1), xi(1, 0), xi(1, 1));
    H = p * mu * (std::pow(n2, 0.5 * (p - 2)) * Eigen::Matrix4d::Identity() +
                  (p - 2) * std::pow(n2, 0.5 * (p - 4)) * v * v.transpose());
    return H;
  }
  const double h = 1e-6;
  for (int j = 0; j < 4; ++j) {
    Mat2 e = Mat2::Zero();
    e(j / 2, j % 2) = h;
    Mat2 d = (dW(xi + e) - dW(xi - e)) / (2 * h);
    H.col(j) << d(0, 0), d(0, 1), d(1, 0), d(1, 1);
  }
  return 0.5 * (H + H.transpose());
}

double BodyPotential::F(double t, const Vec2& x, const Vec2& z) const {
  double conf = kappa == 0.0 ? 0.0 : kappa * std::pow(dot(z, z), 0.5 * q);
  return -conf + dot(f.eval(t, x), z);
}

Vec2 BodyPotential::dF(double t, const Vec2& x, const Vec2& z) const {
  Vec2 g = f.eval(t, x);
  if (kappa != 0.0) {
    double n2 = dot(z, z);
    if (q < 2) n2 += 1e-24;
    if (n2 > 0) g -= z * (q * kappa * std::pow(n2, 0.5 * (q - 2)));
  }
  return g;
}

double BodyPotential::Fdot(double t, const Vec2& x, const Vec2& z) const { return dot(fdot.eval(t, x), z); }

double SurfaceDensity::k(const Vec2& nu) const {
  if (variant == SurfaceVariant::Isotropic) return kappa_s * norm(nu);
  Eigen::Vector2d n(nu.x, nu.y);
  return std::sqrt(std::max(0.0, n.dot(M * n)));
}

double SurfaceDensity::cost(const Vec2& p0, const Vec2& p1) const {
  Vec2 d = p1 - p0;
  return k(Vec2{-d.y, d.x});
}

double SurfaceDensity::K1() const {
  if (variant == SurfaceVariant::Isotropic) return kappa_s;
  Eigen::SelfAdjointEigenSolver<Mat2> es(M);
  return std::sqrt(es.eigenvalues()(0));
}

double SurfaceDensity::K2() const {
  if (variant == SurfaceVariant::Isotropic) return kappa_s;
  Eigen::SelfAdjointEigenSolver<Mat2> es(M);
  return std::sqrt(es.eigenvalues()(1));
}

namespace {

Vec2 corner(const AdaptiveTriangulation& m, int s, const std::array<double, 3>& b) {
  const auto& v = m.tris[s];
  return m.vertices[v[0]] * b[0] + m.vertices[v[1]] * b[1] + m.vertices[v[2]] * b[2];
}

// Trace of u on a boundary sub-edge at parameter s from v[0] to v[1].
Vec2 trace(const DiscreteField& u, int id, double s, Vec2* x) {
  const AdaptiveTriangulation& m = *u.mesh;
  const SubEdge& e = m.subedges[id];
  int tri = e.tri[0];
  const auto& tv = m.tris[tri];
  Vec2 va, vb;
  for (int j = 0; j < 3; ++j) {
    if (tv[j] == e.v[0]) va = u.values[tri][j];
    if (tv[j] == e.v[1]) vb = u.values[tri][j];
  }
  *x = lerp(m.vertices[e.v[0]], m.vertices[e.v[1]], s);
  return lerp(va, vb, s);
}

template <class Fn>
double integrate_traction(const DiscreteField& u, Fn&& fn) {
  const AdaptiveTriangulation& m = *u.mesh;
  double total = 0;
  for (std::size_t id = 0; id < m.subedges.size(); ++id) {
    if (m.subedges[id].label != BoundaryLabel::Traction) continue;
    double len = m.subedge_length(static_cast<int>(id));
    for (const auto& [s, w] : edge_rule()) {
      Vec2 x;
      Vec2 z = trace(u, static_cast<int>(id), s, &x);
      total += len * w * fn(x, z, static_cast<int>(id), s);
    }
  }
  return total;
}

}  // namespace

double bulk_energy(const DiscreteField& u, const EnergyModel& model) {
  double total = 0;
  for (std::size_t s = 0; s < u.values.size(); ++s)
    total += u.mesh->area(static_cast<int>(s)) * model.bulk.W(u.gradient(static_cast<int>(s)));
  return total;
}

double body_work(double t, const DiscreteField& u, const EnergyModel& model) {
  if (model.body.kappa == 0.0 && model.body.f.is_zero()) return 0.0;
  const auto& rule = triangle_rule(model.quadrature);
  double total = 0;
  for (std::size_t s = 0; s < u.values.size(); ++s) {
    int si = static_cast<int>(s);
    double acc = 0;
    for (const auto& qp : rule) acc += qp.weight * model.body.F(t, corner(*u.mesh, si, qp.bary), u.eval(si, qp.bary));
    total += u.mesh->area(si) * acc;
  }
  return total;
}

double surface_work(double t, const DiscreteField& u, const EnergyModel& model) {
  if (model.traction.l.is_zero()) return 0.0;
  return integrate_traction(u, [&](const Vec2& x, const Vec2& z, int, double) {
    return dot(model.traction.l.eval(t, x), z);
  });
}

double elastic_energy(double t, const DiscreteField& u, const EnergyModel& model) {
  return bulk_energy(u, model) - body_work(t, u, model) - surface_work(t, u, model);
}

DerivativeActions derivative_actions(double t, const DiscreteField& u, const DiscreteField& psi,
                                     const EnergyModel& model) {
  DerivativeActions out;
  const auto& rule = triangle_rule(model.quadrature);
  for (std::size_t s = 0; s < u.values.size(); ++s) {
    int si = static_cast<int>(s);
    double area = u.mesh->area(si);
    out.dW += area * (model.bulk.dW(u.gradient(si)).cwiseProduct(psi.gradient(si))).sum();
    double df = 0, fd = 0;
    for (const auto& qp : rule) {
      Vec2 x = corner(*u.mesh, si, qp.bary);
      Vec2 z = u.eval(si, qp.bary);
      df += qp.weight * dot(model.body.dF(t, x, z), psi.eval(si, qp.bary));
      fd += qp.weight * model.body.Fdot(t, x, z);
    }
    out.dF += area * df;
    out.Fdot += area * fd;
  }
  if (!model.traction.l.is_zero()) {
    out.dG = integrate_traction(psi, [&](const Vec2& x, const Vec2& z, int, double) {
      return dot(model.traction.l.eval(t, x), z);
    });
    out.Gdot = integrate_traction(u, [&](const Vec2& x, const Vec2& z, int, double) {
      return dot(model.traction.ldot.eval(t, x), z);
    });
  }
  return out;
}

double gradient_norm_pp(const DiscreteField& u, double p, int) {
  double total = 0;
  for (std::size_t s = 0; s < u.values.size(); ++s)
    total += u.mesh->area(static_cast<int>(s)) * std::pow(u.gradient(static_cast<int>(s)).norm(), p);
  return total;
}

double field_norm_qq(const DiscreteField& u, double q, int quadrature) {
  const auto& rule = triangle_rule(quadrature);
  double total = 0;
  for (std::size_t s = 0; s < u.values.size(); ++s) {
    int si = static_cast<int>(s);
    double acc = 0;
    for (const auto& qp : rule) acc += qp.weight * std::pow(norm(u.eval(si, qp.bary)), q);
    total += u.mesh->area(si) * acc;
  }
  return total;
}

double sup_body_load(const EnergyModel& model, const RegularTriangulation& tri, double T) {
  if (model.body.f.is_zero()) return 0.0;
  Vec2 lo = tri.vertices[0], hi = tri.vertices[0];
  for (const auto& p : tri.vertices) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  const int n = 64;
  std::vector<Vec2> pts;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      Vec2 p{lo.x + (hi.x - lo.x) * i / (n - 1), lo.y + (hi.y - lo.y) * j / (n - 1)};
      if (tri.locate(p) >= 0) pts.push_back(p);
    }
  double sup = 0;
  for (int k = 0; k < n; ++k) {
    double t = T * k / (n - 1);
    for (const auto& p : pts) sup = std::max(sup, norm(model.body.f.eval(t, p)));
  }
  return sup;
}

double sup_traction_load(const EnergyModel& model, const RegularTriangulation& tri, double T) {
  if (model.traction.l.is_zero()) return 0.0;
  const int n = 64;
  double sup = 0;
  for (const auto& e : tri.edges) {
    if (e.label != BoundaryLabel::Traction) continue;
    for (int i = 0; i < n; ++i) {
      Vec2 p = lerp(tri.vertices[e.v[0]], tri.vertices[e.v[1]], static_cast<double>(i) / (n - 1));
      for (int k = 0; k < n; ++k) sup = std::max(sup, norm(model.traction.l.eval(T * k / (n - 1), p)));
    }
  }
  return sup;
}

double trace_constant(const RegularTriangulation& base) {
  auto mesh = subdivide(std::make_shared<RegularTriangulation>(base),
                        AdaptiveParams::uniform(base.edges.size(), 0.5));
  const AdaptiveTriangulation& m = *mesh;
  std::vector<int> local(m.vertices.size(), -1);
  int n = 0;
  for (std::size_t s = 0; s < m.tris.size(); ++s) {
    if (!base.in_omega_s[s / 4]) continue;
    for (int v : m.tris[s])
      if (local[v] < 0) local[v] = n++;
  }
  if (n == 0) return 0.0;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n), B = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t s = 0; s < m.tris.size(); ++s) {
    if (!base.in_omega_s[s / 4]) continue;
    const auto& v = m.tris[s];
    Vec2 p[3] = {m.vertices[v[0]], m.vertices[v[1]], m.vertices[v[2]]};
    double area = m.area(static_cast<int>(s));
    Vec2 g[3];
    for (int i = 0; i < 3; ++i) {
      const Vec2& pj = p[(i + 1) % 3];
      const Vec2& pk = p[(i + 2) % 3];
      g[i] = Vec2{pj.y - pk.y, pk.x - pj.x} * (1.0 / (2 * area));
    }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        A(local[v[i]], local[v[j]]) += area * dot(g[i], g[j]) + area / 12.0 * (i == j ? 2.0 : 1.0);
  }
  for (const auto& e : m.subedges) {
    if (e.label != BoundaryLabel::Traction) continue;
    int a = local[e.v[0]], b = local[e.v[1]];
    if (a < 0 || b < 0) continue;
    double len = dist(m.vertices[e.v[0]], m.vertices[e.v[1]]);
    B(a, a) += len / 3;
    B(b, b) += len / 3;
    B(a, b) += len / 6;
    B(b, a) += len / 6;
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(B, A);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

CoercivityConstants coercivity_constants(const EnergyModel& model, const RegularTriangulation& tri, double T) {
  CoercivityConstants c;
  const double mu = model.bulk.a0();
  const double p = model.bulk.exponent();
  const double q = model.body.q;
  const double kappa = model.body.kappa;
  const double area = tri.total_area();
  c.sup_f = sup_body_load(model, tri, T);
  c.sup_l = sup_traction_load(model, tri, T);

  if (kappa == 0.0) {
    if (!model.degenerate_ok)
      throw DegenerateModel("kappa_F = 0: the body potential gives no confinement (set degenerate_ok to accept)");
    if (c.sup_f > 0 || c.sup_l > 0)
      throw DegenerateModel("kappa_F = 0 with non-zero loads: no coercivity bound is available");
    c.alpha0 = mu;
    c.beta0 = 0;
    c.alpha1 = model.bulk.a1();
    c.beta1 = 0;
    c.gradient_only = true;
    return c;
  }

  double alpha_body = kappa;
  double upper_body = kappa;
  if (c.sup_f > 0) {
    // |f.z| <= (kappa/2)|z|^q + (1/q') delta^{-q'} |f|^{q'} with delta^q / q = kappa / 2.
    double qp = q / (q - 1);
    double delta = std::pow(q * kappa / 2, 1.0 / q);
    c.beta0 += area * std::pow(c.sup_f / delta, qp) / qp;
    alpha_body = kappa / 2;
    c.beta1 += area * std::pow(c.sup_f, qp) / qp;
    upper_body += 1.0 / q;
  }
  double alpha = std::min(mu, alpha_body);
  c.alpha1 = std::max(model.bulk.a1(), upper_body);
  if (c.sup_l > 0) {
    if (p != 2.0 || q != 2.0) throw DegenerateModel("traction coercivity constants are derived for p = q = 2 only");
    double length = 0;
    for (const auto& e : tri.edges)
      if (e.label == BoundaryLabel::Traction) length += dist(tri.vertices[e.v[0]], tri.vertices[e.v[1]]);
    c.gamma_s = trace_constant(tri);
    double load2 = c.sup_l * c.sup_l * length * c.gamma_s * c.gamma_s;
    // |G| <= eta (||grad u||^2 + ||u||^2) + load2 / (4 eta), eta = alpha / 2.
    c.beta0 += load2 / (2 * alpha);
    alpha /= 2;
    c.alpha1 += 1.0;
    c.beta1 += load2 / 4;
  }
  c.alpha0 = alpha;
  return c;
}

}  // namespace fracture
