#include "fracture/crack.hpp"

#include <algorithm>
#include <climits>
#include <cmath>

#include <json.hpp>

#include "fracture/errors.hpp"
#include "fracture/model.hpp"

namespace fracture {

SubEdgeKey subedge_key(const AdaptiveTriangulation& m, int id) {
  const SubEdge& e = m.subedges[id];
  SubEdgeKey key;
  key.kind = e.kind;
  key.base = e.base;
  key.sub = e.sub;
  if (e.kind == SubEdgeKind::Half) {
    double split = 1.0 - m.params.t[e.base];
    key.s0 = e.sub == 0 ? 0.0 : split;
    key.s1 = e.sub == 0 ? split : 1.0;
  } else {
    auto loc = interior_edge_locals(e.sub);
    const auto& te = m.base->tri_edges[e.base];
    key.s0 = m.params.t[te[loc[0]]];
    key.s1 = m.params.t[te[loc[1]]];
  }
  return key;
}

CrackEdge crack_edge(const AdaptiveTriangulation& m, int id, int step) {
  const SubEdge& e = m.subedges[id];
  CrackEdge c;
  c.key = subedge_key(m, id);
  c.p0 = m.vertices[e.v[0]];
  c.p1 = m.vertices[e.v[1]];
  if (e.kind == SubEdgeKind::Half) {
    const Edge& be = m.base->edges[e.base];
    c.base_length = dist(m.base->vertices[be.v[0]], m.base->vertices[be.v[1]]);
  }
  c.step_added = step;
  return c;
}

bool CrackSet::insert(const CrackEdge& edge) { return edges_.emplace(edge.key, edge).second; }

void CrackSet::unite(const CrackSet& other) {
  for (const auto& [key, edge] : other.edges_) edges_.emplace(key, edge);
}

bool CrackSet::subset_of(const CrackSet& other) const {
  for (const auto& [key, edge] : edges_)
    if (!other.contains(key)) return false;
  return true;
}

bool operator==(const CrackSet& a, const CrackSet& b) {
  if (a.edges_.size() != b.edges_.size()) return false;
  for (auto ia = a.edges_.begin(), ib = b.edges_.begin(); ia != a.edges_.end(); ++ia, ++ib)
    if (!(ia->first == ib->first)) return false;
  return true;
}

namespace {

using Intervals = std::vector<std::pair<double, double>>;

Intervals merge(Intervals v) {
  std::sort(v.begin(), v.end());
  Intervals out;
  for (const auto& iv : v) {
    if (!out.empty() && iv.first <= out.back().second)
      out.back().second = std::max(out.back().second, iv.second);
    else
      out.push_back(iv);
  }
  return out;
}

// Measure of [a, b] outside the merged intervals.
double uncovered(double a, double b, const Intervals& cover) {
  double cur = a, out = 0;
  for (const auto& [lo, hi] : cover) {
    if (hi <= cur) continue;
    if (lo >= b) break;
    if (lo > cur) out += lo - cur;
    cur = std::max(cur, hi);
    if (cur >= b) break;
  }
  if (cur < b) out += b - cur;
  return out;
}

double measure(const Intervals& merged) {
  double s = 0;
  for (const auto& [lo, hi] : merged) s += hi - lo;
  return s;
}

// Unit-normal value of k for a base edge represented by one of its halves.
double unit_cost(const CrackEdge& e, const SurfaceDensity& k) { return k.cost(e.p0, e.p1) / dist(e.p0, e.p1); }

struct HalfGroup {
  Intervals intervals;
  const CrackEdge* sample = nullptr;
};

std::map<int, HalfGroup> half_groups(const CrackSet& set) {
  std::map<int, HalfGroup> groups;
  for (const auto& [key, edge] : set.edges()) {
    if (key.kind != SubEdgeKind::Half) continue;
    auto& g = groups[key.base];
    g.intervals.emplace_back(key.s0, key.s1);
    if (!g.sample) g.sample = &edge;
  }
  for (auto& [e, g] : groups) g.intervals = merge(std::move(g.intervals));
  return groups;
}

}  // namespace

std::vector<std::pair<double, double>> CrackSet::merged_intervals(int base_edge) const {
  Intervals v;
  SubEdgeKey lo{SubEdgeKind::Half, base_edge, INT_MIN, -1e300, -1e300};
  for (auto it = edges_.lower_bound(lo); it != edges_.end(); ++it) {
    if (it->first.kind != SubEdgeKind::Half || it->first.base != base_edge) break;
    v.emplace_back(it->first.s0, it->first.s1);
  }
  return merge(std::move(v));
}

double CrackSet::uncovered_length(const CrackEdge& edge) const {
  if (edge.key.kind == SubEdgeKind::Interior) return contains(edge.key) ? 0.0 : edge.length();
  return uncovered(edge.key.s0, edge.key.s1, merged_intervals(edge.key.base)) * edge.base_length;
}

double CrackSet::length() const {
  double total = 0;
  for (const auto& [key, edge] : edges_)
    if (key.kind == SubEdgeKind::Interior) total += edge.length();
  for (const auto& [e, g] : half_groups(*this)) total += measure(g.intervals) * g.sample->base_length;
  return total;
}

std::vector<double> CrackSet::knots_on_edge(const RegularTriangulation& tri, int e) const {
  std::vector<double> out;
  for (const auto& [key, edge] : edges_) {
    if (key.kind == SubEdgeKind::Half) {
      if (key.base == e) out.push_back(1.0 - (key.sub == 0 ? key.s1 : key.s0));
    } else {
      auto loc = interior_edge_locals(key.sub);
      const auto& te = tri.tri_edges[key.base];
      if (te[loc[0]] == e) out.push_back(key.s0);
      if (te[loc[1]] == e) out.push_back(key.s1);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double CrackEdge::length() const {
  if (key.kind == SubEdgeKind::Half) return (key.s1 - key.s0) * base_length;
  return dist(p0, p1);
}

CrackSet crack_set_from(const AdaptiveTriangulation& m, const std::vector<int>& ids, int step) {
  CrackSet out;
  for (int id : ids) out.insert(crack_edge(m, id, step));
  return out;
}

double surface_energy(const CrackSet& gamma, const SurfaceDensity& k) {
  double total = 0;
  for (const auto& [key, edge] : gamma.edges())
    if (key.kind == SubEdgeKind::Interior) total += k.cost(edge.p0, edge.p1);
  for (const auto& [e, g] : half_groups(gamma))
    total += measure(g.intervals) * g.sample->base_length * unit_cost(*g.sample, k);
  return total;
}

double incremental_surface_energy(const CrackSet& added, const CrackSet& prev, const SurfaceDensity& k) {
  double total = 0;
  for (const auto& [key, edge] : added.edges())
    if (key.kind == SubEdgeKind::Interior && !prev.contains(key)) total += k.cost(edge.p0, edge.p1);
  auto prev_groups = half_groups(prev);
  for (const auto& [e, g] : half_groups(added)) {
    auto it = prev_groups.find(e);
    double free = 0;
    for (const auto& [lo, hi] : g.intervals)
      free += it == prev_groups.end() ? hi - lo : uncovered(lo, hi, it->second.intervals);
    total += free * g.sample->base_length * unit_cost(*g.sample, k);
  }
  return total;
}

double covered_surface_energy(const CrackSet& added, const CrackSet& prev, const SurfaceDensity& k) {
  double total = 0;
  for (const auto& [key, edge] : added.edges())
    if (key.kind == SubEdgeKind::Interior && prev.contains(key)) total += k.cost(edge.p0, edge.p1);
  auto prev_groups = half_groups(prev);
  for (const auto& [e, g] : half_groups(added)) {
    auto it = prev_groups.find(e);
    if (it == prev_groups.end()) continue;
    double shared = 0;
    for (const auto& [lo, hi] : g.intervals)
      for (const auto& [plo, phi] : it->second.intervals) shared += std::max(0.0, std::min(hi, phi) - std::max(lo, plo));
    total += shared * g.sample->base_length * unit_cost(*g.sample, k);
  }
  return total;
}

namespace {

struct Crossing {
  int edge;
  double t_raw;
  double t;
  double lambda;  // position along the polyline (segment index + local parameter)
  Vec2 point;     // projected point
};

std::vector<Crossing> crossings(const Polyline& path, const RegularTriangulation& tri, double a) {
  std::vector<Crossing> out;
  const double vtol = 1e-10 * tri.eps;
  for (std::size_t si = 0; si < path.size(); ++si) {
    const Segment& S = path[si];
    Vec2 d = S.p1 - S.p0;
    double slen = norm(d);
    if (slen == 0) throw NonGenericPosition("crack segment has zero length");
    for (std::size_t e = 0; e < tri.edges.size(); ++e) {
      const Vec2& x = tri.vertices[tri.edges[e].v[0]];
      const Vec2& y = tri.vertices[tri.edges[e].v[1]];
      Vec2 r = y - x;
      double den = cross(r, d);
      double elen = norm(r);
      if (std::fabs(den) <= 1e-14 * elen * slen) {
        // Parallel: reject overlap with positive length.
        if (std::fabs(cross(d, x - S.p0)) / slen <= vtol) {
          double u0 = dot(x - S.p0, d) / (slen * slen), u1 = dot(y - S.p0, d) / (slen * slen);
          if (std::min(std::max(u0, u1), 1.0) - std::max(std::min(u0, u1), 0.0) > 1e-12)
            throw NonGenericPosition("crack segment overlaps a mesh edge");
        }
        continue;
      }
      double sigma = cross(S.p0 - x, d) / den;  // along edge
      double lam = cross(S.p0 - x, r) / den;    // along segment
      const double ltol = 1e-12;
      if (lam < -ltol || lam > 1 + ltol || sigma < -vtol / elen || sigma > 1 + vtol / elen) continue;
      if (sigma * elen <= vtol || (1 - sigma) * elen <= vtol)
        throw NonGenericPosition("crack segment passes through a mesh vertex");
      double t_raw = 1.0 - sigma;
      double t = std::clamp(t_raw, a, 1.0 - a);
      out.push_back({static_cast<int>(e), t_raw, t, static_cast<double>(si) + std::clamp(lam, 0.0, 1.0),
                     x * t + y * (1.0 - t)});
    }
  }
  std::sort(out.begin(), out.end(), [](const Crossing& p, const Crossing& q) {
    return p.lambda != q.lambda ? p.lambda < q.lambda : p.edge < q.edge;
  });
  // A joint of two segments lying on an edge is reported twice.
  out.erase(std::unique(out.begin(), out.end(), [](const Crossing& p, const Crossing& q) { return p.edge == q.edge; }),
            out.end());
  return out;
}

InterpolatingCurve curve_from_crossings(const std::vector<Crossing>& cs, const RegularTriangulation& tri) {
  InterpolatingCurve out;
  std::vector<int> pos(tri.edges.size(), -1);
  for (std::size_t i = 0; i < cs.size(); ++i) {
    if (pos[cs[i].edge] >= 0) throw NonGenericPosition("crack crosses a mesh edge more than once");
    pos[cs[i].edge] = static_cast<int>(i);
    out.knots.emplace_back(cs[i].edge, cs[i].t);
    out.crossing_params.push_back(cs[i].t_raw);
  }
  struct Piece {
    double lambda;
    int T, k;
    Segment seg;
  };
  std::vector<Piece> pieces;
  for (std::size_t T = 0; T < tri.triangles.size(); ++T) {
    int hit[3], n = 0;
    for (int j = 0; j < 3; ++j)
      if (pos[tri.tri_edges[T][j]] >= 0) hit[n++] = j;
    if (n < 2) continue;
    if (n > 2) throw NonGenericPosition("crack crosses all three edges of a triangle");
    int k = -1;
    for (int kk = 0; kk < 3; ++kk) {
      auto loc = interior_edge_locals(kk);
      if ((loc[0] == hit[0] && loc[1] == hit[1]) || (loc[0] == hit[1] && loc[1] == hit[0])) k = kk;
    }
    const Crossing& c0 = cs[pos[tri.tri_edges[T][hit[0]]]];
    const Crossing& c1 = cs[pos[tri.tri_edges[T][hit[1]]]];
    const Crossing& first = c0.lambda <= c1.lambda ? c0 : c1;
    const Crossing& second = c0.lambda <= c1.lambda ? c1 : c0;
    pieces.push_back({first.lambda, static_cast<int>(T), k, {first.point, second.point}});
  }
  std::sort(pieces.begin(), pieces.end(), [](const Piece& p, const Piece& q) {
    return p.lambda != q.lambda ? p.lambda < q.lambda : p.T < q.T;
  });
  for (const auto& p : pieces) {
    out.polyline.push_back(p.seg);
    out.interior.emplace_back(p.T, p.k);
  }
  return out;
}

bool on_grid_line(double v, double origin, double eps) {
  double r = (v - origin) / eps;
  return std::fabs(r - std::round(r)) <= 1e-9;
}

}  // namespace

InterpolatingCurve interpolating_curve(const Segment& s, const RegularTriangulation& tri, double a) {
  return curve_from_crossings(crossings({s}, tri, a), tri);
}

InitialCrack approximate_initial_crack(const Polyline& gamma0, const MeshPtr& tri, double a) {
  const RegularTriangulation& base = *tri;
  const int nE = static_cast<int>(base.edges.size());
  InitialCrack out;
  out.params = AdaptiveParams::uniform(nE, a);
  std::vector<char> fixed(nE, 0);
  std::vector<std::pair<int, int>> halves;  // (base edge, side)

  auto assign = [&](int e, double t) {
    if (fixed[e] && out.params.t[e] != t) throw NonGenericPosition("two crack pieces prescribe different knots on one edge");
    fixed[e] = 1;
    out.params.t[e] = t;
  };

  Polyline generic;
  for (const auto& S : gamma0) {
    bool horizontal = S.p0.y == S.p1.y && on_grid_line(S.p0.y, base.origin.y, base.eps);
    bool vertical = S.p0.x == S.p1.x && on_grid_line(S.p0.x, base.origin.x, base.eps);
    if (!horizontal && !vertical) {
      generic.push_back(S);
      continue;
    }
    // Segment along a mesh line: realized by half sub-edges of the covered base edges.
    Vec2 d = S.p1 - S.p0;
    double slen = norm(d);
    if (slen == 0) throw NonGenericPosition("crack segment has zero length");
    for (int e = 0; e < nE; ++e) {
      const Vec2& x = base.vertices[base.edges[e].v[0]];
      const Vec2& y = base.vertices[base.edges[e].v[1]];
      Vec2 r = y - x;
      if (std::fabs(cross(r, d)) > 1e-12 * norm(r) * slen) continue;
      if (std::fabs(cross(d, x - S.p0)) / slen > 1e-12 * base.eps) continue;
      double elen2 = dot(r, r);
      double s0 = std::clamp(dot(S.p0 - x, r) / elen2, 0.0, 1.0);
      double s1 = std::clamp(dot(S.p1 - x, r) / elen2, 0.0, 1.0);
      double lo = std::min(s0, s1), hi = std::max(s0, s1);
      const double tol = 1e-12;
      if (hi - lo <= tol) continue;
      if (lo <= tol && hi >= 1 - tol) {
        halves.emplace_back(e, 0);
        halves.emplace_back(e, 1);
      } else if (lo <= tol) {
        assign(e, std::clamp(1.0 - hi, a, 1.0 - a));
        halves.emplace_back(e, 0);
      } else if (hi >= 1 - tol) {
        assign(e, std::clamp(1.0 - lo, a, 1.0 - a));
        halves.emplace_back(e, 1);
      } else {
        throw NonGenericPosition("crack segment ends inside a single mesh edge on both sides");
      }
    }
  }

  std::vector<std::pair<int, int>> interior;
  if (!generic.empty()) {
    InterpolatingCurve c = curve_from_crossings(crossings(generic, base, a), base);
    for (const auto& [e, t] : c.knots) assign(e, t);
    interior = c.interior;
  }

  out.mesh = subdivide(tri, out.params);
  const AdaptiveTriangulation& m = *out.mesh;
  for (const auto& [e, side] : halves) out.subedges.push_back(m.half_id(e, side));
  for (const auto& [T, k] : interior) out.subedges.push_back(m.interior_id(T, k));
  std::sort(out.subedges.begin(), out.subedges.end());
  out.subedges.erase(std::unique(out.subedges.begin(), out.subedges.end()), out.subedges.end());
  for (int id : out.subedges)
    if (!m.subedges[id].crackable)
      throw CrackOutsideBrittle("initial crack edge (" + std::to_string(m.vertices[m.subedges[id].v[0]].x) + ", " +
                                std::to_string(m.vertices[m.subedges[id].v[0]].y) +
                                ") is not crackable (outside closure(Ω_B) or on the Neumann boundary)");
  out.set = crack_set_from(m, out.subedges, -1);

  DofMap dofs = assemble_dofs(m, out.subedges, nullptr);
  std::vector<Vec2> values(dofs.num_classes);
  for (int c = 0; c < dofs.num_classes; ++c) values[c] = Vec2{static_cast<double>(c), 0.0};
  out.witness = reconstruct(dofs, out.mesh, values, out.subedges);
  return out;
}

std::string crack_json(const CrackSet& gamma) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& [key, edge] : gamma.edges()) {
    j.push_back({{"p0", {edge.p0.x, edge.p0.y}},
                 {"p1", {edge.p1.x, edge.p1.y}},
                 {"step_added", edge.step_added},
                 {"kind", key.kind == SubEdgeKind::Half ? "half" : "interior"},
                 {"base", key.base},
                 {"sub", key.sub},
                 {"params", {key.s0, key.s1}}});
  }
  return j.dump(1);
}

}  // namespace fracture
