#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "helpers.hpp"

using namespace testing;

namespace {

// Unit square, one cell, fully brittle, given boundary label on all sides.
MeshPtr single_cell(BoundaryLabel label) {
  DomainSpec d = rectangle(1, 1);
  d.brittle = {{0, 0, 1, 1}};
  if (label != BoundaryLabel::Neumann) d.boundary = {{{0, 0}, {1, 0}, label}, {{1, 0}, {1, 1}, label},
                                                     {{1, 1}, {0, 1}, label}, {{0, 1}, {0, 0}, label}};
  return mesh_of(d, 1);
}

std::vector<int> interior_subedges(const AdaptiveTriangulation& m) {
  std::vector<int> out;
  for (std::size_t id = 0; id < m.subedges.size(); ++id)
    if (!m.subedges[id].on_boundary()) out.push_back(static_cast<int>(id));
  return out;
}

// Number of distinct corner classes by explicit union-find over slots (3 * subtriangle + corner).
int count_classes(const AdaptiveTriangulation& m, const std::vector<int>& cracked) {
  std::vector<int> parent(3 * m.tris.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::set<int> open(cracked.begin(), cracked.end());
  for (std::size_t id = 0; id < m.subedges.size(); ++id) {
    const SubEdge& e = m.subedges[id];
    if (e.on_boundary() || open.count(static_cast<int>(id))) continue;
    for (int v : e.v) {
      int a = -1, b = -1;
      for (int j = 0; j < 3; ++j) {
        if (m.tris[e.tri[0]][j] == v) a = 3 * e.tri[0] + j;
        if (m.tris[e.tri[1]][j] == v) b = 3 * e.tri[1] + j;
      }
      parent[find(a)] = find(b);
    }
  }
  std::set<int> roots;
  for (std::size_t i = 0; i < parent.size(); ++i) roots.insert(find(static_cast<int>(i)));
  return static_cast<int>(roots.size());
}

}  // namespace

TEST_CASE("nodal interpolant reproduces affine and constant fields") {
  MeshPtr tri = mesh_of(rectangle(1, 1), 0.25);
  for (auto g : {VectorFormula::parse("x", "0"), VectorFormula::parse("2", "-3"),
                 VectorFormula::parse("x - 2*y", "3*x + y")}) {
    DiscreteField u = lift(nodal_interpolant(g, *tri, 0), midpoint_mesh(tri));
    for (std::size_t s = 0; s < u.values.size(); ++s)
      for (int j = 0; j < 3; ++j) {
        Vec2 p = u.mesh->vertices[u.mesh->tris[s][j]];
        CHECK(dist(u.values[s][j], g.eval(0, p)) < 1e-15);
      }
    CHECK(jump_set(u).empty());
  }
}

TEST_CASE("nodal interpolant of x^2 obeys the interpolation bound") {
  double eps = 0.5;
  MeshPtr tri = mesh_of(rectangle(1, 1), eps);
  VectorFormula g = VectorFormula::parse("x^2", "0");
  NodalField n = nodal_interpolant(g, *tri, 0);
  for (std::size_t v = 0; v < tri->vertices.size(); ++v) CHECK(n.values[v].x == g.eval(0, tri->vertices[v]).x);
  DiscreteField u = lift(n, midpoint_mesh(tri));
  double worst = 0;
  for (int i = 0; i <= 64; ++i)
    for (int j = 0; j <= 64; ++j) {
      Vec2 p{i / 64.0, j / 64.0};
      int s = u.mesh->locate(p);
      REQUIRE(s >= 0);
      worst = std::max(worst, std::fabs(u.eval_at(s, p).x - p.x * p.x));
    }
  CHECK(worst <= eps * eps / 4 + 1e-14);
}

TEST_CASE("jump sets") {
  MeshPtr tri = single_cell(BoundaryLabel::Neumann);
  AdaptivePtr m = midpoint_mesh(tri);
  DiscreteField u = field_from(m, [](Vec2 p) { return Vec2{p.x, p.y}; });
  CHECK(jump_set(u).empty());

  // Unit jump across one interior sub-edge: lift one side's corners on that edge.
  int id = m->interior_id(0, 1);
  const SubEdge& e = m->subedges[id];
  DiscreteField w = u;
  w.topology = {id};
  int s = e.tri[0];
  for (int j = 0; j < 3; ++j) w.values[s][j] += Vec2{1, 0};
  // Subtriangle s shares its other edges too; declare them and check exactly the jumping edges appear.
  std::vector<int> jumps = jump_set(w);
  CHECK(std::find(jumps.begin(), jumps.end(), id) != jumps.end());
  for (int j : jumps) {
    const auto& se = m->tri_subedges[s];
    CHECK(std::find(se.begin(), se.end(), j) != se.end());
  }
  // A declared edge with equal traces is closed.
  DiscreteField c = u;
  c.topology = {id};
  CHECK(jump_set(c).empty());
  CHECK(c.declared(id));
}

TEST_CASE("Dirichlet mismatch") {
  MeshPtr tri = mesh_of(stretched_strip(1, 0.5, 0.25, 0.75), 0.25);
  AdaptivePtr m = midpoint_mesh(tri);
  VectorFormula gf = VectorFormula::parse("x", "0");
  NodalField g = nodal_interpolant(gf, *tri, 0);
  DiscreteField u = lift(g, m);
  CHECK(dirichlet_mismatch(u, g).empty());

  // Shift by (1, 0) on the subtriangles touching the right end: exactly its Dirichlet sub-edges mismatch.
  DiscreteField v = u;
  for (std::size_t s = 0; s < m->tris.size(); ++s)
    for (int j = 0; j < 3; ++j)
      if (m->vertices[m->tris[s][j]].x >= 0.75 - 1e-12) v.values[s][j] += Vec2{1, 0};
  std::vector<int> mis = dirichlet_mismatch(v, g);
  double length = 0;
  for (int id : mis) {
    CHECK(m->vertices[m->subedges[id].v[0]].x == 1);
    length += m->subedge_length(id);
  }
  CHECK(length == doctest::Approx(0.5).epsilon(1e-14));

  // Matching at one endpoint only still counts.
  DiscreteField w = u;
  int first = -1;
  for (std::size_t id = 0; id < m->subedges.size(); ++id)
    if (m->subedges[id].label == BoundaryLabel::Dirichlet) {
      first = static_cast<int>(id);
      break;
    }
  const SubEdge& e = m->subedges[first];
  int s = e.tri[0];
  for (int j = 0; j < 3; ++j)
    if (m->tris[s][j] == e.v[0]) w.values[s][j] += Vec2{0, 1e-3};
  mis = dirichlet_mismatch(w, g);
  CHECK(std::find(mis.begin(), mis.end(), first) != mis.end());
  std::vector<int> comb = combined_jump(w, g);
  CHECK(std::includes(comb.begin(), comb.end(), mis.begin(), mis.end()));
}

TEST_CASE("dof counts") {
  // No cracks, all Neumann, one cell of two triangles: 4 corners + 5 knots, two components.
  MeshPtr neu = single_cell(BoundaryLabel::Neumann);
  AdaptivePtr m = midpoint_mesh(neu);
  DofMap d = assemble_dofs(*m, {}, nullptr);
  CHECK(d.num_classes == count_classes(*m, {}));
  CHECK(d.free_unknowns() == 2 * 9);

  // Every interior sub-edge cracked: 8 decoupled subtriangles.
  std::vector<int> all = interior_subedges(*m);
  for (int id : all) REQUIRE(m->subedges[id].crackable);
  DofMap f = assemble_dofs(*m, all, nullptr);
  CHECK(f.free_unknowns() == 6 * 8);
  CHECK(f.num_classes == count_classes(*m, all));

  // Fully Dirichlet, no cracks: only the knot on the diagonal is free.
  MeshPtr dir = single_cell(BoundaryLabel::Dirichlet);
  AdaptivePtr md = midpoint_mesh(dir);
  NodalField g = nodal_interpolant(VectorFormula::parse("x", "y"), *dir, 0);
  DofMap p = assemble_dofs(*md, {}, &g);
  CHECK(p.free_unknowns() == 2);
}

TEST_CASE("assemble then reconstruct shares traces exactly") {
  MeshPtr tri = mesh_of(stretched_strip(1, 0.5, 0.25, 0.75), 0.25);
  AdaptivePtr m = midpoint_mesh(tri);
  std::vector<int> topo;
  for (std::size_t id = 0; id < m->subedges.size(); ++id)
    if (m->subedges[id].crackable && !m->subedges[id].on_boundary() && id % 3 == 0) topo.push_back(static_cast<int>(id));
  DofMap d = assemble_dofs(*m, topo, nullptr);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(-1, 1);
  std::vector<Vec2> vals(d.num_classes);
  for (auto& v : vals) v = {U(rng), U(rng)};
  DiscreteField u = reconstruct(d, m, vals, topo);
  std::vector<int> jumps = jump_set(u, 0.0);
  // Jumps only where declared.
  CHECK(std::includes(topo.begin(), topo.end(), jumps.begin(), jumps.end()));
  CHECK(!jumps.empty());
}

TEST_CASE("interpolation of a straight vertical jump") {
  MeshPtr tri = mesh_of(stretched_strip(1, 1, 0.25, 0.75), 0.25);
  double x0 = 0.5 + 1e-3;
  JumpTarget target;
  target.side = [&](const Vec2& p) { return p.x > x0 ? 1 : 0; };
  target.value = [](int side, const Vec2&) { return side ? Vec2{1, 0} : Vec2{0, 0}; };
  target.jumps = {{{x0, 0}, {x0 + 1e-4, 1}}};
  InterpolatedField r = interpolate_to_fespace(target, tri, 0.25);
  CHECK(r.zeroed_triangles.empty());
  CHECK(!r.curve_subedges.empty());
  std::vector<int> jumps = jump_set(r.field);
  CHECK(std::includes(r.curve_subedges.begin(), r.curve_subedges.end(), jumps.begin(), jumps.end()));
  CHECK(!jumps.empty());
  // Off the band of base triangles crossed by the curve the gradient vanishes.
  for (std::size_t s = 0; s < r.field.values.size(); ++s) {
    Vec2 c = tri->centroid(static_cast<int>(s / 4));
    if (std::fabs(c.x - x0) > 0.25) CHECK(r.field.gradient(s).norm() < 1e-14);
  }
  // Far from the jump, the field takes the target values.
  int s = r.field.mesh->locate({0.1, 0.5});
  CHECK(norm(r.field.eval_at(s, {0.1, 0.5})) < 1e-14);
  s = r.field.mesh->locate({0.9, 0.5});
  CHECK(dist(r.field.eval_at(s, {0.9, 0.5}), {1, 0}) < 1e-14);

  // Scale equivariance: same jump set, field scaled.
  JumpTarget twice = target;
  twice.value = [](int side, const Vec2&) { return side ? Vec2{2.5, 0} : Vec2{0, 0}; };
  InterpolatedField r2 = interpolate_to_fespace(twice, tri, 0.25);
  CHECK(jump_set(r2.field) == jumps);
  for (std::size_t k = 0; k < r.field.values.size(); ++k)
    for (int j = 0; j < 3; ++j) CHECK(dist(r2.field.values[k][j], r.field.values[k][j] * 2.5) < 1e-14);
}

TEST_CASE("crossing jump segments zero their triangles") {
  DomainSpec d = rectangle(1, 1);
  d.brittle = {{0, 0, 1, 1}};
  MeshPtr tri = mesh_of(d, 0.25);
  Segment s1{{0.13, 0.33}, {0.87, 0.69}}, s2{{0.21, 0.83}, {0.79, 0.13}};
  JumpTarget target;
  target.side = [&](const Vec2& p) { return (orient(s1.p0, s1.p1, p) > 0) + 2 * (orient(s2.p0, s2.p1, p) > 0); };
  target.value = [](int side, const Vec2& p) { return Vec2{static_cast<double>(side), p.x}; };
  target.jumps = {s1, s2};
  InterpolatedField r = interpolate_to_fespace(target, tri, 0.25);
  CHECK(!r.zeroed_triangles.empty());
  // jump_set lies within the curve sub-edges plus the boundaries of zeroed base triangles.
  std::set<int> allowed(r.curve_subedges.begin(), r.curve_subedges.end());
  const AdaptiveTriangulation& m = *r.field.mesh;
  for (int T : r.zeroed_triangles)
    for (int e : tri->tri_edges[T])
      for (int side = 0; side < 2; ++side) allowed.insert(m.half_id(e, side));
  for (int id : jump_set(r.field)) CHECK(allowed.count(id));
  for (int T : r.zeroed_triangles)
    for (int j = 0; j < 4; ++j)
      for (const auto& v : r.field.values[4 * T + j]) CHECK(norm(v) == 0);
}

TEST_CASE("gradient of the interpolant converges at first order") {
  VectorFormula g = VectorFormula::parse("sin(2*x)*y", "x*y + cos(y)");
  auto grad = [](const Vec2& p) {
    Mat2 G;
    G << 2 * std::cos(2 * p.x) * p.y, std::sin(2 * p.x), p.y, p.x - std::sin(p.y);
    return G;
  };
  std::vector<double> errs;
  for (double eps : {0.25, 0.125, 0.0625}) {
    MeshPtr tri = mesh_of(rectangle(1, 1), eps);
    DiscreteField u = lift(nodal_interpolant(g, *tri, 0), midpoint_mesh(tri));
    double acc = 0;
    for (std::size_t s = 0; s < u.values.size(); ++s) {
      const auto& v = u.mesh->tris[s];
      for (const auto& qp : triangle_rule(7)) {
        Vec2 x = u.mesh->vertices[v[0]] * qp.bary[0] + u.mesh->vertices[v[1]] * qp.bary[1] +
                 u.mesh->vertices[v[2]] * qp.bary[2];
        acc += u.mesh->area(s) * qp.weight * (u.gradient(s) - grad(x)).squaredNorm();
      }
    }
    errs.push_back(std::sqrt(acc));
  }
  for (std::size_t i = 1; i < errs.size(); ++i) CHECK(std::log2(errs[i - 1] / errs[i]) >= 0.9);
}

TEST_CASE("field export duplicates nodes") {
  MeshPtr tri = mesh_of(rectangle(1, 1), 0.5);
  AdaptivePtr m = midpoint_mesh(tri);
  std::ostringstream os;
  write_field_vtk(os, DiscreteField::zero(m));
  CHECK(os.str().find("POINTS 96 double") != std::string::npos);
  CHECK(os.str().find("POINT_DATA 96") != std::string::npos);
  CHECK(field_json(DiscreteField::zero(m)).find("\"subtriangles\"") != std::string::npos);
}
