#include "fracture/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "fracture/errors.hpp"

namespace fracture {

const char* to_string(BoundaryLabel label) {
  switch (label) {
    case BoundaryLabel::Interior: return "interior";
    case BoundaryLabel::Dirichlet: return "dirichlet";
    case BoundaryLabel::Neumann: return "neumann";
    case BoundaryLabel::Traction: return "traction";
  }
  return "?";
}

double DomainSpec::area() const {
  double s = 0;
  for (std::size_t i = 0; i < polygon.size(); ++i) s += cross(polygon[i], polygon[(i + 1) % polygon.size()]);
  return 0.5 * s;
}

bool DomainSpec::contains(const Vec2& p) const {
  bool inside = false;
  for (std::size_t i = 0, j = polygon.size() - 1; i < polygon.size(); j = i++) {
    const Vec2& a = polygon[i];
    const Vec2& b = polygon[j];
    if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
  }
  return inside;
}

double RegularTriangulation::area(int t) const {
  const auto& v = triangles[t];
  return 0.5 * orient(vertices[v[0]], vertices[v[1]], vertices[v[2]]);
}

Vec2 RegularTriangulation::centroid(int t) const {
  const auto& v = triangles[t];
  return (vertices[v[0]] + vertices[v[1]] + vertices[v[2]]) * (1.0 / 3.0);
}

double RegularTriangulation::total_area() const {
  double s = 0;
  for (std::size_t t = 0; t < triangles.size(); ++t) s += area(static_cast<int>(t));
  return s;
}

int RegularTriangulation::edge_between(int a, int b) const {
  if (a > b) std::swap(a, b);
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (edges[e].v[0] == a && edges[e].v[1] == b) return static_cast<int>(e);
  return -1;
}

bool RegularTriangulation::edge_in_brittle_closure(int e) const {
  for (int t : edges[e].tri)
    if (t >= 0 && region[t] == Region::Brittle) return true;
  return false;
}

namespace {

bool inside_triangle(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c, double tol) {
  double area2 = orient(a, b, c);
  double l0 = orient(p, b, c) / area2;
  double l1 = orient(a, p, c) / area2;
  double l2 = 1.0 - l0 - l1;
  return l0 >= -tol && l1 >= -tol && l2 >= -tol;
}

void build_edges(RegularTriangulation& m) {
  std::map<std::pair<int, int>, int> index;
  m.edges.clear();
  m.tri_edges.assign(m.triangles.size(), {-1, -1, -1});
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    for (int j = 0; j < 3; ++j) {
      int a = m.triangles[t][j];
      int b = m.triangles[t][(j + 1) % 3];
      auto key = std::minmax(a, b);
      auto it = index.find(key);
      int e;
      if (it == index.end()) {
        e = static_cast<int>(m.edges.size());
        Edge edge;
        edge.v = {key.first, key.second};
        edge.tri = {static_cast<int>(t), -1};
        m.edges.push_back(edge);
        index.emplace(key, e);
      } else {
        e = it->second;
        if (m.edges[e].tri[1] >= 0) throw NonConformingDomain("edge shared by more than two triangles");
        m.edges[e].tri[1] = static_cast<int>(t);
      }
      m.tri_edges[t][j] = e;
    }
  }
  for (auto& edge : m.edges) edge.label = edge.on_boundary() ? BoundaryLabel::Neumann : BoundaryLabel::Interior;
}

bool on_grid(double value, double origin, double eps) {
  double r = (value - origin) / eps;
  return std::fabs(r - std::round(r)) <= 1e-9;
}

std::string fmt_point(const Vec2& p) {
  std::ostringstream os;
  os << '(' << p.x << ", " << p.y << ')';
  return os.str();
}

bool point_on_segment(const Vec2& p, const Vec2& a, const Vec2& b, double tol) {
  Vec2 d = b - a;
  double len = norm(d);
  if (len == 0) return dist(p, a) <= tol;
  if (std::fabs(cross(d, p - a)) / len > tol) return false;
  double s = dot(p - a, d) / (len * len);
  return s >= -tol / len && s <= 1 + tol / len;
}

}  // namespace

int RegularTriangulation::locate(const Vec2& p) const {
  const double tol = 1e-12;
  if (!cell_tris.empty()) {
    int ci = static_cast<int>(std::floor((p.x - origin.x) / eps));
    int cj = static_cast<int>(std::floor((p.y - origin.y) / eps));
    for (int dj = 0; dj <= 1; ++dj) {
      for (int di = 0; di <= 1; ++di) {
        for (int sj : {cj - dj, cj + dj}) {
          for (int si : {ci - di, ci + di}) {
            if (si < 0 || sj < 0 || si >= nx || sj >= ny) continue;
            for (int t : cell_tris[static_cast<std::size_t>(sj) * nx + si]) {
              if (t < 0) continue;
              const auto& v = triangles[t];
              if (inside_triangle(p, vertices[v[0]], vertices[v[1]], vertices[v[2]], tol)) return t;
            }
          }
        }
      }
    }
    return -1;
  }
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const auto& v = triangles[t];
    if (inside_triangle(p, vertices[v[0]], vertices[v[1]], vertices[v[2]], tol)) return static_cast<int>(t);
  }
  return -1;
}

RegularTriangulation make_triangulation(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> triangles,
                                        double eps) {
  RegularTriangulation m;
  m.eps = eps;
  m.vertices = std::move(vertices);
  m.triangles = std::move(triangles);
  for (auto& t : m.triangles)
    if (orient(m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]) < 0) std::swap(t[1], t[2]);
  build_edges(m);
  m.region.assign(m.triangles.size(), Region::Elastic);
  m.in_omega_s.assign(m.triangles.size(), 0);
  return m;
}

RegularTriangulation build_structured_mesh(const DomainSpec& input, double eps) {
  if (!(eps > 0)) throw NonConformingDomain("mesh size must be positive");
  DomainSpec domain = input;
  if (domain.polygon.size() < 4) throw NonConformingDomain("polygon needs at least four vertices");
  if (domain.area() < 0) std::reverse(domain.polygon.begin(), domain.polygon.end());
  for (std::size_t i = 0; i < domain.polygon.size(); ++i) {
    const Vec2& a = domain.polygon[i];
    const Vec2& b = domain.polygon[(i + 1) % domain.polygon.size()];
    if (a.x != b.x && a.y != b.y)
      throw NonConformingDomain("polygon side " + fmt_point(a) + "-" + fmt_point(b) + " is not axis-aligned");
  }

  Vec2 lo = domain.polygon[0], hi = domain.polygon[0];
  for (const auto& p : domain.polygon) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  auto require_grid = [&](const Vec2& p, const std::string& what) {
    if (!on_grid(p.x, lo.x, eps) || !on_grid(p.y, lo.y, eps))
      throw NonConformingDomain(what + " " + fmt_point(p) + " is not on the eps-grid (eps = " +
                                std::to_string(eps) + ")");
  };
  for (const auto& p : domain.polygon) require_grid(p, "polygon vertex");
  for (const auto& r : domain.brittle) {
    require_grid({r.x0, r.y0}, "brittle rectangle corner");
    require_grid({r.x1, r.y1}, "brittle rectangle corner");
  }
  for (const auto& s : domain.boundary) {
    require_grid(s.a, "boundary label endpoint");
    require_grid(s.b, "boundary label endpoint");
    if (s.a.x != s.b.x && s.a.y != s.b.y)
      throw NonConformingDomain("boundary label segment " + fmt_point(s.a) + "-" + fmt_point(s.b) +
                                " is not axis-aligned");
  }

  RegularTriangulation m;
  m.eps = eps;
  m.domain = domain;
  m.origin = lo;
  m.nx = static_cast<int>(std::lround((hi.x - lo.x) / eps));
  m.ny = static_cast<int>(std::lround((hi.y - lo.y) / eps));
  const int gx = m.nx + 1;
  auto grid_point = [&](int i, int j) { return Vec2{lo.x + i * eps, lo.y + j * eps}; };

  std::vector<char> cell_in(static_cast<std::size_t>(m.nx) * m.ny, 0);
  std::vector<int> vid(static_cast<std::size_t>(gx) * (m.ny + 1), -1);
  for (int j = 0; j < m.ny; ++j)
    for (int i = 0; i < m.nx; ++i) {
      Vec2 c = grid_point(i, j) + Vec2{0.5 * eps, 0.5 * eps};
      if (!domain.contains(c)) continue;
      cell_in[static_cast<std::size_t>(j) * m.nx + i] = 1;
      for (int dj = 0; dj <= 1; ++dj)
        for (int di = 0; di <= 1; ++di) vid[static_cast<std::size_t>(j + dj) * gx + i + di] = 0;
    }
  for (int j = 0; j <= m.ny; ++j)
    for (int i = 0; i <= m.nx; ++i) {
      int& id = vid[static_cast<std::size_t>(j) * gx + i];
      if (id < 0) continue;
      id = static_cast<int>(m.vertices.size());
      m.vertices.push_back(grid_point(i, j));
    }

  m.cell_tris.assign(cell_in.size(), {-1, -1});
  for (int j = 0; j < m.ny; ++j)
    for (int i = 0; i < m.nx; ++i) {
      if (!cell_in[static_cast<std::size_t>(j) * m.nx + i]) continue;
      int p00 = vid[static_cast<std::size_t>(j) * gx + i];
      int p10 = vid[static_cast<std::size_t>(j) * gx + i + 1];
      int p01 = vid[static_cast<std::size_t>(j + 1) * gx + i];
      int p11 = vid[static_cast<std::size_t>(j + 1) * gx + i + 1];
      int t0 = static_cast<int>(m.triangles.size());
      if ((i + j) % 2 == 0) {
        m.triangles.push_back({p00, p10, p11});
        m.triangles.push_back({p00, p11, p01});
      } else {
        m.triangles.push_back({p00, p10, p01});
        m.triangles.push_back({p10, p11, p01});
      }
      m.cell_tris[static_cast<std::size_t>(j) * m.nx + i] = {t0, t0 + 1};
    }
  if (m.triangles.empty()) throw NonConformingDomain("polygon contains no grid cell");
  build_edges(m);

  m.region.assign(m.triangles.size(), Region::Elastic);
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    Vec2 c = m.centroid(static_cast<int>(t));
    for (const auto& r : domain.brittle)
      if (r.contains(c)) m.region[t] = Region::Brittle;
  }

  const double tol = 1e-12 * eps;
  for (const auto& s : domain.boundary) {
    double covered = 0;
    for (auto& e : m.edges) {
      if (!e.on_boundary()) continue;
      if (point_on_segment(m.vertices[e.v[0]], s.a, s.b, tol) && point_on_segment(m.vertices[e.v[1]], s.a, s.b, tol)) {
        e.label = s.label;
        covered += dist(m.vertices[e.v[0]], m.vertices[e.v[1]]);
      }
    }
    if (std::fabs(covered - dist(s.a, s.b)) > 1e-9 * eps)
      throw NonConformingDomain("boundary label segment " + fmt_point(s.a) + "-" + fmt_point(s.b) +
                                " does not lie on the domain boundary");
  }

  std::vector<char> brittle_vertex(m.vertices.size(), 0);
  for (std::size_t t = 0; t < m.triangles.size(); ++t)
    if (m.region[t] == Region::Brittle)
      for (int v : m.triangles[t]) brittle_vertex[v] = 1;
  std::vector<char> traction_vertex(m.vertices.size(), 0);
  for (const auto& e : m.edges) {
    if (e.label != BoundaryLabel::Traction) continue;
    for (int v : e.v) {
      traction_vertex[v] = 1;
      if (brittle_vertex[v])
        throw DomainError("traction edge at " + fmt_point(m.vertices[v]) +
                          " touches the brittle region: closure(Ω_B)∩∂_S Ω = ∅ is required");
    }
  }
  m.in_omega_s.assign(m.triangles.size(), 0);
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    if (m.region[t] != Region::Elastic) continue;
    for (int v : m.triangles[t])
      if (traction_vertex[v]) m.in_omega_s[t] = 1;
  }
  return m;
}

TriangleShape triangle_shape(const Vec2& a, const Vec2& b, const Vec2& c, double eps) {
  double la = dist(b, c), lb = dist(c, a), lc = dist(a, b);
  double area = 0.5 * std::fabs(orient(a, b, c));
  double r = 2 * area / (la + lb + lc);
  auto angle = [](const Vec2& p, const Vec2& q, const Vec2& s) {
    Vec2 u = q - p, v = s - p;
    return std::atan2(std::fabs(cross(u, v)), dot(u, v));
  };
  double A = angle(a, b, c), B = angle(b, c, a), C = angle(c, a, b);
  double amax = std::max({A, B, C});
  double lmax = std::max({la, lb, lc});
  // Smallest enclosing disc: the longest edge for non-acute triangles, else the circumdisc.
  double enclosing = amax >= std::numbers::pi / 2 - 1e-14 ? lmax : la * lb * lc / (2 * area);
  return {2 * r / eps, enclosing / eps, std::min({A, B, C}), amax, std::min({la, lb, lc}) / eps, lmax / eps};
}

RegularityReport check_regularity(const RegularTriangulation& tri) {
  RegularityReport rep;
  rep.min_inradius_ratio = rep.min_angle = rep.min_edge_ratio = 1e300;
  for (const auto& t : tri.triangles) {
    TriangleShape s = triangle_shape(tri.vertices[t[0]], tri.vertices[t[1]], tri.vertices[t[2]], tri.eps);
    rep.min_inradius_ratio = std::min(rep.min_inradius_ratio, s.inradius_ratio);
    rep.max_circumdiameter_ratio = std::max(rep.max_circumdiameter_ratio, s.enclosing_ratio);
    rep.min_angle = std::min(rep.min_angle, s.min_angle);
    rep.max_angle = std::max(rep.max_angle, s.max_angle);
    rep.min_edge_ratio = std::min(rep.min_edge_ratio, s.min_edge);
    rep.max_edge_ratio = std::max(rep.max_edge_ratio, s.max_edge);
  }
  const double tol = 1e-12;
  rep.pass = rep.min_inradius_ratio >= tri.c1 - tol && rep.max_circumdiameter_ratio <= tri.c2 + tol &&
             rep.min_angle >= tri.theta1 - tol && rep.max_angle <= tri.theta2 + tol &&
             rep.min_edge_ratio >= tri.c1 - tol && rep.max_edge_ratio <= tri.c2 + tol;
  return rep;
}

std::array<int, 2> interior_edge_locals(int k) {
  static const std::array<int, 2> table[3] = {{0, 2}, {1, 0}, {2, 1}};
  return table[k];
}

double AdaptiveTriangulation::area(int s) const {
  const auto& v = tris[s];
  return 0.5 * orient(vertices[v[0]], vertices[v[1]], vertices[v[2]]);
}

int AdaptiveTriangulation::locate(const Vec2& p) const {
  int T = base->locate(p);
  if (T < 0) return -1;
  const double tol = 1e-12;
  for (int j = 0; j < 4; ++j) {
    const auto& v = tris[4 * T + j];
    if (inside_triangle(p, vertices[v[0]], vertices[v[1]], vertices[v[2]], tol)) return 4 * T + j;
  }
  return 4 * T + 3;
}

AdaptivePtr subdivide(const MeshPtr& base, const AdaptiveParams& params) {
  const RegularTriangulation& m = *base;
  const int nV = static_cast<int>(m.vertices.size());
  const int nE = static_cast<int>(m.edges.size());
  const int nT = static_cast<int>(m.triangles.size());
  if (!(params.a > 0 && params.a <= 0.5)) throw ParamOutOfRange("a must lie in (0, 1/2]");
  if (static_cast<int>(params.t.size()) != nE)
    throw ParamOutOfRange("expected " + std::to_string(nE) + " knot parameters, got " +
                          std::to_string(params.t.size()));
  const double lo = params.a, hi = 1.0 - params.a, slack = 1e-14;
  for (int e = 0; e < nE; ++e) {
    double t = params.t[e];
    if (!(t >= lo - slack && t <= hi + slack))
      throw ParamOutOfRange("knot parameter " + std::to_string(t) + " on edge " + std::to_string(e) +
                            " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }

  auto out = std::make_shared<AdaptiveTriangulation>();
  AdaptiveTriangulation& A = *out;
  A.base = base;
  A.params = params;
  A.vertices = m.vertices;
  A.vertices.reserve(nV + nE);
  for (int e = 0; e < nE; ++e) {
    const Vec2& x = m.vertices[m.edges[e].v[0]];
    const Vec2& y = m.vertices[m.edges[e].v[1]];
    double t = params.t[e];
    A.vertices.push_back(x * t + y * (1.0 - t));
  }

  A.subedges.resize(2 * nE + 3 * nT);
  for (int e = 0; e < nE; ++e) {
    const Edge& edge = m.edges[e];
    bool crackable = m.edge_in_brittle_closure(e) &&
                     (edge.label == BoundaryLabel::Interior || edge.label == BoundaryLabel::Dirichlet);
    for (int side = 0; side < 2; ++side) {
      SubEdge& s = A.subedges[2 * e + side];
      s.kind = SubEdgeKind::Half;
      s.base = e;
      s.sub = side;
      s.label = edge.label;
      s.crackable = crackable;
      s.v = side == 0 ? std::array<int, 2>{edge.v[0], nV + e} : std::array<int, 2>{nV + e, edge.v[1]};
    }
  }

  A.tris.resize(4 * nT);
  A.tri_subedges.resize(4 * nT);
  for (int T = 0; T < nT; ++T) {
    const auto& v = m.triangles[T];
    const auto& te = m.tri_edges[T];
    int mk[3] = {nV + te[0], nV + te[1], nV + te[2]};
    A.tris[4 * T + 0] = {v[0], mk[0], mk[2]};
    A.tris[4 * T + 1] = {v[1], mk[1], mk[0]};
    A.tris[4 * T + 2] = {v[2], mk[2], mk[1]};
    A.tris[4 * T + 3] = {mk[0], mk[1], mk[2]};
    for (int k = 0; k < 3; ++k) {
      auto loc = interior_edge_locals(k);
      SubEdge& s = A.subedges[A.interior_id(T, k)];
      s.kind = SubEdgeKind::Interior;
      s.base = T;
      s.sub = k;
      s.label = BoundaryLabel::Interior;
      s.crackable = m.region[T] == Region::Brittle;
      s.v = {mk[loc[0]], mk[loc[1]]};
    }
  }

  std::unordered_map<std::uint64_t, int> lookup;
  lookup.reserve(A.subedges.size() * 2);
  auto pair_key = [](int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
  };
  for (std::size_t id = 0; id < A.subedges.size(); ++id)
    lookup.emplace(pair_key(A.subedges[id].v[0], A.subedges[id].v[1]), static_cast<int>(id));
  for (int s = 0; s < 4 * nT; ++s) {
    for (int j = 0; j < 3; ++j) {
      int id = lookup.at(pair_key(A.tris[s][j], A.tris[s][(j + 1) % 3]));
      A.tri_subedges[s][j] = id;
      auto& adj = A.subedges[id].tri;
      if (adj[0] < 0)
        adj[0] = s;
      else
        adj[1] = s;
    }
  }
  return out;
}

AdaptiveBounds adaptive_bounds(double a, int points) {
  const Vec2 ref[3] = {{0, 0}, {1, 0}, {1, 1}};
  std::vector<double> grid;
  if (points <= 1) {
    grid = {0.5};
  } else {
    for (int i = 0; i < points; ++i) grid.push_back(a + (1 - 2 * a) * i / (points - 1));
  }
  AdaptiveBounds b{1e300, 0, 1e300, 0, 1e300, 0};
  for (double t0 : grid)
    for (double t1 : grid)
      for (double t2 : grid) {
        double ts[3] = {t0, t1, t2};
        Vec2 mk[3];
        for (int j = 0; j < 3; ++j) mk[j] = ref[j] * ts[j] + ref[(j + 1) % 3] * (1 - ts[j]);
        const Vec2 sub[4][3] = {{ref[0], mk[0], mk[2]}, {ref[1], mk[1], mk[0]}, {ref[2], mk[2], mk[1]},
                                {mk[0], mk[1], mk[2]}};
        for (const auto& s : sub) {
          TriangleShape sh = triangle_shape(s[0], s[1], s[2], 1.0);
          b.theta1 = std::min(b.theta1, sh.min_angle);
          b.theta2 = std::max(b.theta2, sh.max_angle);
          b.c1 = std::min(b.c1, sh.inradius_ratio);
          b.c2 = std::max(b.c2, sh.enclosing_ratio);
          b.min_edge = std::min(b.min_edge, sh.min_edge);
          b.max_edge = std::max(b.max_edge, sh.max_edge);
        }
      }
  return b;
}

namespace {

template <class Tris>
void write_vtk(std::ostream& os, const std::vector<Vec2>& vertices, const Tris& tris, const std::vector<int>& region,
               const char* title) {
  os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET POLYDATA\n";
  os.precision(17);
  os << "POINTS " << vertices.size() << " double\n";
  for (const auto& p : vertices) os << p.x << ' ' << p.y << " 0\n";
  os << "POLYGONS " << tris.size() << ' ' << 4 * tris.size() << '\n';
  for (const auto& t : tris) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  os << "CELL_DATA " << tris.size() << "\nSCALARS region int 1\nLOOKUP_TABLE default\n";
  for (int r : region) os << r << '\n';
}

}  // namespace

void write_mesh_vtk(std::ostream& os, const RegularTriangulation& tri) {
  std::vector<int> region;
  for (auto r : tri.region) region.push_back(static_cast<int>(r));
  write_vtk(os, tri.vertices, tri.triangles, region, "regular triangulation");
}

void write_mesh_vtk(std::ostream& os, const AdaptiveTriangulation& tri) {
  std::vector<int> region;
  for (std::size_t s = 0; s < tri.tris.size(); ++s) region.push_back(static_cast<int>(tri.region(static_cast<int>(s))));
  write_vtk(os, tri.vertices, tri.tris, region, "adaptive triangulation");
}

std::string mesh_json(const RegularTriangulation& tri) {
  nlohmann::ordered_json j;
  j["eps"] = tri.eps;
  auto& verts = j["vertices"] = nlohmann::ordered_json::array();
  for (const auto& p : tri.vertices) verts.push_back({p.x, p.y});
  auto& tris = j["triangles"] = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < tri.triangles.size(); ++t) {
    const auto& v = tri.triangles[t];
    tris.push_back({{"vertices", {v[0], v[1], v[2]}},
                    {"region", tri.region[t] == Region::Brittle ? "brittle" : "elastic"}});
  }
  auto& edges = j["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : tri.edges)
    edges.push_back({{"vertices", {e.v[0], e.v[1]}}, {"triangles", {e.tri[0], e.tri[1]}}, {"label", to_string(e.label)}});
  return j.dump(1);
}

}  // namespace fracture
