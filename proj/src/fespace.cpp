#include "fracture/fespace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "fracture/crack.hpp"
#include "fracture/errors.hpp"

namespace fracture {

DiscreteField DiscreteField::zero(const AdaptivePtr& mesh) {
  DiscreteField u;
  u.mesh = mesh;
  u.values.assign(mesh->tris.size(), {Vec2{}, Vec2{}, Vec2{}});
  return u;
}

Mat2 DiscreteField::gradient(int s) const {
  const auto& v = mesh->tris[s];
  const Vec2& p0 = mesh->vertices[v[0]];
  const Vec2& p1 = mesh->vertices[v[1]];
  const Vec2& p2 = mesh->vertices[v[2]];
  double inv = 1.0 / orient(p0, p1, p2);
  Vec2 g0{(p1.y - p2.y) * inv, (p2.x - p1.x) * inv};
  Vec2 g1{(p2.y - p0.y) * inv, (p0.x - p2.x) * inv};
  Vec2 g2{(p0.y - p1.y) * inv, (p1.x - p0.x) * inv};
  const auto& u = values[s];
  Mat2 G;
  G(0, 0) = u[0].x * g0.x + u[1].x * g1.x + u[2].x * g2.x;
  G(0, 1) = u[0].x * g0.y + u[1].x * g1.y + u[2].x * g2.y;
  G(1, 0) = u[0].y * g0.x + u[1].y * g1.x + u[2].y * g2.x;
  G(1, 1) = u[0].y * g0.y + u[1].y * g1.y + u[2].y * g2.y;
  return G;
}

Vec2 DiscreteField::eval_at(int s, const Vec2& p) const {
  const auto& v = mesh->tris[s];
  const Vec2& a = mesh->vertices[v[0]];
  const Vec2& b = mesh->vertices[v[1]];
  const Vec2& c = mesh->vertices[v[2]];
  double area2 = orient(a, b, c);
  double l0 = orient(p, b, c) / area2;
  double l1 = orient(a, p, c) / area2;
  return eval(s, {l0, l1, 1.0 - l0 - l1});
}

double DiscreteField::scale() const {
  double m = 0;
  for (const auto& tri : values)
    for (const auto& v : tri) m = std::max(m, norm(v));
  return m + 1.0;
}

bool DiscreteField::declared(int subedge) const {
  return std::binary_search(topology.begin(), topology.end(), subedge);
}

Vec2 NodalField::at(const AdaptiveTriangulation& mesh, int vertex) const {
  if (mesh.is_base_vertex(vertex)) return values[vertex];
  int e = vertex - static_cast<int>(mesh.base->vertices.size());
  const Edge& edge = mesh.base->edges[e];
  double t = mesh.params.t[e];
  return values[edge.v[0]] * t + values[edge.v[1]] * (1.0 - t);
}

NodalField NodalField::operator-(const NodalField& o) const {
  NodalField r = *this;
  for (std::size_t i = 0; i < r.values.size(); ++i) r.values[i] -= o.values[i];
  return r;
}

NodalField NodalField::operator+(const NodalField& o) const {
  NodalField r = *this;
  for (std::size_t i = 0; i < r.values.size(); ++i) r.values[i] += o.values[i];
  return r;
}

NodalField NodalField::scaled(double s) const {
  NodalField r = *this;
  for (auto& v : r.values) v *= s;
  return r;
}

NodalField nodal_interpolant(const VectorFormula& g, const RegularTriangulation& tri, double t) {
  NodalField out;
  out.values.reserve(tri.vertices.size());
  for (const auto& p : tri.vertices) {
    Vec2 v = g.eval(t, p);
    if (!std::isfinite(v.x) || !std::isfinite(v.y))
      throw FormulaError("boundary deformation is not finite at (" + std::to_string(p.x) + ", " +
                         std::to_string(p.y) + "), t = " + std::to_string(t));
    out.values.push_back(v);
  }
  return out;
}

DiscreteField lift(const NodalField& g, const AdaptivePtr& mesh) {
  DiscreteField u;
  u.mesh = mesh;
  u.values.resize(mesh->tris.size());
  for (std::size_t s = 0; s < mesh->tris.size(); ++s)
    for (int j = 0; j < 3; ++j) u.values[s][j] = g.at(*mesh, mesh->tris[s][j]);
  return u;
}

namespace {

int corner_index(const AdaptiveTriangulation& m, int tri, int vertex) {
  const auto& v = m.tris[tri];
  return v[0] == vertex ? 0 : v[1] == vertex ? 1 : 2;
}

double diff(const Vec2& a, const Vec2& b) { return std::max(std::fabs(a.x - b.x), std::fabs(a.y - b.y)); }

}  // namespace

std::vector<int> jump_set(const DiscreteField& u, double tol) {
  const AdaptiveTriangulation& m = *u.mesh;
  const double threshold = tol * u.scale();
  std::vector<int> out;
  for (std::size_t id = 0; id < m.subedges.size(); ++id) {
    const SubEdge& e = m.subedges[id];
    if (e.on_boundary()) continue;
    for (int v : e.v) {
      if (diff(u.values[e.tri[0]][corner_index(m, e.tri[0], v)], u.values[e.tri[1]][corner_index(m, e.tri[1], v)]) >
          threshold) {
        out.push_back(static_cast<int>(id));
        break;
      }
    }
  }
  return out;
}

std::vector<int> dirichlet_mismatch(const DiscreteField& u, const NodalField& g, double tol) {
  const AdaptiveTriangulation& m = *u.mesh;
  double gmax = 0;
  for (const auto& v : g.values) gmax = std::max(gmax, norm(v));
  const double threshold = tol * std::max(u.scale(), gmax + 1.0);
  std::vector<int> out;
  for (std::size_t id = 0; id < m.subedges.size(); ++id) {
    const SubEdge& e = m.subedges[id];
    if (e.label != BoundaryLabel::Dirichlet) continue;
    for (int v : e.v) {
      if (diff(u.values[e.tri[0]][corner_index(m, e.tri[0], v)], g.at(m, v)) > threshold) {
        out.push_back(static_cast<int>(id));
        break;
      }
    }
  }
  return out;
}

std::vector<int> combined_jump(const DiscreteField& u, const NodalField& g, double tol) {
  std::vector<int> a = jump_set(u, tol), b = dirichlet_mismatch(u, g, tol), out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

DofMap assemble_dofs(const AdaptiveTriangulation& m, const std::vector<int>& topology, const NodalField* g) {
  const int nslots = 3 * static_cast<int>(m.tris.size());
  std::vector<int> parent(nslots);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  auto unite = [&](int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent[a] = b;
  };
  std::vector<char> open(m.subedges.size(), 0);
  for (int id : topology) open[id] = 1;
  for (std::size_t id = 0; id < m.subedges.size(); ++id) {
    const SubEdge& e = m.subedges[id];
    if (e.on_boundary() || open[id]) continue;
    for (int v : e.v) unite(3 * e.tri[0] + corner_index(m, e.tri[0], v), 3 * e.tri[1] + corner_index(m, e.tri[1], v));
  }

  DofMap d;
  d.class_of_slot.assign(nslots, -1);
  std::vector<int> root_class(nslots, -1);
  for (int s = 0; s < nslots; ++s) {
    int r = find(s);
    if (root_class[r] < 0) root_class[r] = d.num_classes++;
    d.class_of_slot[s] = root_class[r];
  }
  d.pinned.assign(d.num_classes, 0);
  d.pin_value.assign(d.num_classes, Vec2{});
  if (g) {
    for (std::size_t id = 0; id < m.subedges.size(); ++id) {
      const SubEdge& e = m.subedges[id];
      if (e.label != BoundaryLabel::Dirichlet || open[id]) continue;
      for (int v : e.v) {
        int c = d.class_of_slot[3 * e.tri[0] + corner_index(m, e.tri[0], v)];
        d.pinned[c] = 1;
        d.pin_value[c] = g->at(m, v);
      }
    }
  }
  d.free_index.assign(d.num_classes, -1);
  for (int c = 0; c < d.num_classes; ++c)
    if (!d.pinned[c]) d.free_index[c] = d.num_free++;

  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint64_t x) {
    h ^= x;
    h *= 1099511628211ull;
  };
  for (int c : d.class_of_slot) mix(static_cast<std::uint64_t>(c));
  for (char p : d.pinned) mix(static_cast<std::uint64_t>(p) + 7);
  d.hash = h;
  return d;
}

DiscreteField reconstruct(const DofMap& dofs, const AdaptivePtr& mesh, const std::vector<Vec2>& class_values,
                          std::vector<int> topology) {
  DiscreteField u;
  u.mesh = mesh;
  u.values.resize(mesh->tris.size());
  for (std::size_t s = 0; s < mesh->tris.size(); ++s)
    for (int j = 0; j < 3; ++j) {
      int c = dofs.class_of_slot[3 * s + j];
      u.values[s][j] = dofs.pinned[c] ? dofs.pin_value[c] : class_values[c];
    }
  std::sort(topology.begin(), topology.end());
  topology.erase(std::unique(topology.begin(), topology.end()), topology.end());
  u.topology = std::move(topology);
  return u;
}

namespace {

bool segment_intersection(const Segment& a, const Segment& b, Vec2* out) {
  Vec2 r = a.p1 - a.p0, s = b.p1 - b.p0;
  double den = cross(r, s);
  if (std::fabs(den) < 1e-300) return false;
  double ta = cross(b.p0 - a.p0, s) / den;
  double tb = cross(b.p0 - a.p0, r) / den;
  const double tol = 1e-12;
  if (ta < -tol || ta > 1 + tol || tb < -tol || tb > 1 + tol) return false;
  *out = a.p0 + r * ta;
  return true;
}

bool in_triangle(const RegularTriangulation& tri, int T, const Vec2& p, double tol) {
  const auto& v = tri.triangles[T];
  const Vec2& a = tri.vertices[v[0]];
  const Vec2& b = tri.vertices[v[1]];
  const Vec2& c = tri.vertices[v[2]];
  double area2 = orient(a, b, c);
  double l0 = orient(p, b, c) / area2, l1 = orient(a, p, c) / area2;
  return l0 >= -tol && l1 >= -tol && 1 - l0 - l1 >= -tol;
}

}  // namespace

InterpolatedField interpolate_to_fespace(const JumpTarget& target, const MeshPtr& tri, double a) {
  const RegularTriangulation& base = *tri;
  const int nE = static_cast<int>(base.edges.size());
  const int nT = static_cast<int>(base.triangles.size());

  std::vector<InterpolatingCurve> curves;
  for (const auto& s : target.jumps) curves.push_back(interpolating_curve(s, base, a));

  std::vector<char> zeroed(nT, 0);
  std::vector<int> owner(nE, -1);
  AdaptiveParams params = AdaptiveParams::uniform(nE, a);
  for (std::size_t c = 0; c < curves.size(); ++c) {
    for (const auto& [e, t] : curves[c].knots) {
      if (owner[e] >= 0 && owner[e] != static_cast<int>(c)) {
        for (int T : base.edges[e].tri)
          if (T >= 0) zeroed[T] = 1;
        continue;
      }
      owner[e] = static_cast<int>(c);
      params.t[e] = t;
    }
  }
  for (std::size_t i = 0; i < target.jumps.size(); ++i)
    for (std::size_t j = i + 1; j < target.jumps.size(); ++j) {
      Vec2 x;
      if (!segment_intersection(target.jumps[i], target.jumps[j], &x)) continue;
      for (int T = 0; T < nT; ++T)
        if (in_triangle(base, T, x, 1e-12)) zeroed[T] = 1;
    }

  AdaptivePtr mesh = subdivide(tri, params);
  const AdaptiveTriangulation& m = *mesh;
  InterpolatedField out;
  std::vector<int> topology;
  std::vector<int> cut_local(nT, -1);  // interior edge k of the curve piece in T
  for (const auto& c : curves)
    for (const auto& [T, k] : c.interior) {
      if (zeroed[T]) continue;
      cut_local[T] = k;
      int id = m.interior_id(T, k);
      if (!m.subedges[id].crackable) throw CrackOutsideBrittle("interpolating curve leaves the brittle region");
      topology.push_back(id);
      out.curve_subedges.push_back(id);
    }
  for (int T = 0; T < nT; ++T) {
    if (!zeroed[T]) continue;
    out.zeroed_triangles.push_back(T);
    for (int e : base.tri_edges[T]) {
      if (base.edges[e].on_boundary()) continue;
      for (int side = 0; side < 2; ++side) {
        int id = m.half_id(e, side);
        if (!m.subedges[id].crackable) throw CrackOutsideBrittle("zeroed triangle borders a non-crackable edge");
        topology.push_back(id);
      }
    }
  }
  std::sort(topology.begin(), topology.end());
  topology.erase(std::unique(topology.begin(), topology.end()), topology.end());
  std::sort(out.curve_subedges.begin(), out.curve_subedges.end());

  DofMap dofs = assemble_dofs(m, topology, nullptr);
  std::vector<Vec2> sum(dofs.num_classes);
  std::vector<int> count(dofs.num_classes, 0);
  for (std::size_t s = 0; s < m.tris.size(); ++s) {
    const auto& v = m.tris[s];
    bool zero = zeroed[s / 4];
    int side = 0;
    if (!zero) {
      const int T = static_cast<int>(s / 4), j = static_cast<int>(s % 4), k = cut_local[T];
      if (k >= 0) {
        // Interior edge k cuts off corner subtriangle k; a base corner lies on the same side of the
        // curve and of the jump segment.
        const auto& bc = base.triangles[T];
        side = target.side(base.vertices[j == k ? bc[k] : bc[(k + 1) % 3]]);
      } else {
        side = target.side((m.vertices[v[0]] + m.vertices[v[1]] + m.vertices[v[2]]) * (1.0 / 3.0));
      }
    }
    for (int j = 0; j < 3; ++j) {
      int c = dofs.class_of_slot[3 * s + j];
      sum[c] += zero ? Vec2{} : target.value(side, m.vertices[v[j]]);
      ++count[c];
    }
  }
  for (int c = 0; c < dofs.num_classes; ++c) sum[c] *= 1.0 / count[c];
  out.field = reconstruct(dofs, mesh, sum, topology);
  return out;
}

void write_field_vtk(std::ostream& os, const DiscreteField& u) {
  const AdaptiveTriangulation& m = *u.mesh;
  const std::size_t n = m.tris.size();
  os << "# vtk DataFile Version 3.0\ndiscrete field\nASCII\nDATASET POLYDATA\n";
  os.precision(17);
  os << "POINTS " << 3 * n << " double\n";
  for (std::size_t s = 0; s < n; ++s)
    for (int v : m.tris[s]) os << m.vertices[v].x << ' ' << m.vertices[v].y << " 0\n";
  os << "POLYGONS " << n << ' ' << 4 * n << '\n';
  for (std::size_t s = 0; s < n; ++s) os << "3 " << 3 * s << ' ' << 3 * s + 1 << ' ' << 3 * s + 2 << '\n';
  os << "POINT_DATA " << 3 * n << "\nVECTORS u double\n";
  for (const auto& tri : u.values)
    for (const auto& v : tri) os << v.x << ' ' << v.y << " 0\n";
  os << "CELL_DATA " << n << "\nSCALARS grad_u double 4\nLOOKUP_TABLE default\n";
  for (std::size_t s = 0; s < n; ++s) {
    Mat2 G = u.gradient(static_cast<int>(s));
    os << G(0, 0) << ' ' << G(0, 1) << ' ' << G(1, 0) << ' ' << G(1, 1) << '\n';
  }
}

std::string field_json(const DiscreteField& u) {
  nlohmann::ordered_json j;
  auto& tris = j["subtriangles"] = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < u.values.size(); ++s) {
    nlohmann::ordered_json corners = nlohmann::ordered_json::array();
    for (int c = 0; c < 3; ++c) {
      const Vec2& p = u.mesh->vertices[u.mesh->tris[s][c]];
      corners.push_back({{"x", {p.x, p.y}}, {"u", {u.values[s][c].x, u.values[s][c].y}}});
    }
    tris.push_back(corners);
  }
  j["topology"] = u.topology;
  return j.dump(1);
}

}  // namespace fracture
