#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "helpers.hpp"

using namespace testing;

TEST_CASE("unit square counts") {
  DomainSpec d = rectangle(1, 1);
  RegularTriangulation h = build_structured_mesh(d, 0.5);
  CHECK(h.triangles.size() == 8);
  CHECK(h.edges.size() == 16);
  CHECK(h.vertices.size() == 9);
  CHECK(build_structured_mesh(d, 0.25).triangles.size() == 32);
  // Euler characteristic of a disc.
  RegularTriangulation q = build_structured_mesh(d, 0.125);
  CHECK(static_cast<long>(q.vertices.size()) - static_cast<long>(q.edges.size()) +
            static_cast<long>(q.triangles.size()) ==
        1);
}

TEST_CASE("diagonals alternate between neighbouring cells") {
  RegularTriangulation m = build_structured_mesh(rectangle(1, 1), 0.5);
  // Collect the diagonal direction of each cell: the interior edge not on a grid line.
  std::set<int> signs;
  for (const auto& e : m.edges) {
    Vec2 a = m.vertices[e.v[0]], b = m.vertices[e.v[1]];
    if (a.x != b.x && a.y != b.y) signs.insert((b.x - a.x) * (b.y - a.y) > 0 ? 1 : -1);
  }
  CHECK(signs.size() == 2);
}

TEST_CASE("non-conforming domains") {
  DomainSpec l;
  l.polygon = {{0, 0}, {1, 0}, {1, 0.5}, {0.5, 0.5}, {0.5, 1}, {0, 1}};
  CHECK_NOTHROW(build_structured_mesh(l, 0.25));
  l.boundary = {{{1.0 / 3, 0}, {1, 0}, BoundaryLabel::Dirichlet}};
  CHECK_THROWS_AS(build_structured_mesh(l, 0.25), NonConformingDomain);
  DomainSpec b = rectangle(1, 1);
  b.brittle = {{0.3, 0, 0.6, 1}};
  CHECK_THROWS_AS(build_structured_mesh(b, 0.25), NonConformingDomain);
  CHECK_THROWS_AS(build_structured_mesh(rectangle(1, 1), 0.3), NonConformingDomain);
}

TEST_CASE("traction touching the brittle region is rejected") {
  DomainSpec d = rectangle(1, 1);
  d.brittle = {{0.5, 0, 1, 1}};
  d.boundary = {{{0.5, 1}, {0, 1}, BoundaryLabel::Traction}};
  CHECK_THROWS_WITH_AS(build_structured_mesh(d, 0.25), doctest::Contains("closure(Ω_B)∩∂_S Ω = ∅"), DomainError);
  d.boundary = {{{0.25, 1}, {0, 1}, BoundaryLabel::Traction}};
  CHECK_NOTHROW(build_structured_mesh(d, 0.25));
}

TEST_CASE("labels and regions") {
  DomainSpec d = stretched_strip(1, 0.5, 0.25, 0.75);
  RegularTriangulation m = build_structured_mesh(d, 0.25);
  int dir = 0, neu = 0, brittle = 0;
  for (const auto& e : m.edges) {
    dir += e.label == BoundaryLabel::Dirichlet;
    neu += e.label == BoundaryLabel::Neumann;
  }
  for (auto r : m.region) brittle += r == Region::Brittle;
  CHECK(dir == 4);
  CHECK(neu == 8);
  CHECK(brittle == 8);
}

TEST_CASE("right isoceles regularity constants") {
  // Closed-form inradius of a right triangle with legs e: r = (e + e - e sqrt 2) / 2.
  double eps = 0.125;
  TriangleShape s = triangle_shape({0, 0}, {eps, 0}, {0, eps}, eps);
  CHECK(s.inradius_ratio == doctest::Approx(2 - std::sqrt(2.0)).epsilon(1e-14));
  CHECK(s.enclosing_ratio == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(s.min_angle == doctest::Approx(M_PI / 4));
  CHECK(s.max_angle == doctest::Approx(M_PI / 2));
  RegularityReport r = check_regularity(build_structured_mesh(rectangle(1, 0.5), eps));
  CHECK(r.pass);
  CHECK(r.min_inradius_ratio >= kStructuredC1);
  CHECK(r.max_circumdiameter_ratio <= kStructuredC2 + 1e-14);
}

TEST_CASE("equilateral triangles have a degenerate angle range") {
  double h = std::sqrt(3.0) / 2;
  RegularTriangulation m = make_triangulation({{0, 0}, {1, 0}, {0.5, h}, {1.5, h}}, {{0, 1, 2}, {1, 3, 2}}, 1.0);
  RegularityReport r = check_regularity(m);
  CHECK(r.min_angle == doctest::Approx(M_PI / 3).epsilon(1e-14));
  CHECK(r.max_angle == doctest::Approx(M_PI / 3).epsilon(1e-14));
}

TEST_CASE("midpoint subdivision") {
  MeshPtr tri = mesh_of(rectangle(1, 1), 0.5);
  AdaptivePtr m = midpoint_mesh(tri);
  CHECK(m->tris.size() == 4 * tri->triangles.size());
  for (std::size_t T = 0; T < tri->triangles.size(); ++T)
    for (int j = 0; j < 4; ++j) CHECK(m->area(4 * T + j) == doctest::Approx(tri->area(T) / 4).epsilon(1e-14));
  // Similarity: every subtriangle has the parent's angle range.
  for (std::size_t s = 0; s < m->tris.size(); ++s) {
    const auto& v = m->tris[s];
    TriangleShape sh = triangle_shape(m->vertices[v[0]], m->vertices[v[1]], m->vertices[v[2]], 0.5);
    CHECK(sh.min_angle == doctest::Approx(M_PI / 4));
    CHECK(sh.max_angle == doctest::Approx(M_PI / 2));
  }
}

TEST_CASE("knot placement and area conservation") {
  MeshPtr tri = mesh_of(rectangle(1, 0.5), 0.25);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.1, 0.9);
  AdaptiveParams p = AdaptiveParams::uniform(tri->edges.size(), 0.1);
  for (double& t : p.t) t = U(rng);
  AdaptivePtr m = subdivide(tri, p);
  for (std::size_t e = 0; e < tri->edges.size(); ++e) {
    Vec2 x = tri->vertices[tri->edges[e].v[0]], y = tri->vertices[tri->edges[e].v[1]];
    Vec2 z = m->vertices[m->knot_vertex(static_cast<int>(e))];
    Vec2 expect = x * p.t[e] + y * (1 - p.t[e]);
    CHECK(dist(z, expect) < 1e-15);
  }
  double total = 0;
  for (std::size_t s = 0; s < m->tris.size(); ++s) {
    CHECK(m->area(s) > 0);
    total += m->area(s);
  }
  CHECK(total == doctest::Approx(tri->total_area()).epsilon(1e-12));
  // Deterministic.
  AdaptivePtr again = subdivide(tri, p);
  CHECK(again->vertices == m->vertices);
}

TEST_CASE("extreme knots keep angles within the grid bounds") {
  MeshPtr tri = mesh_of(rectangle(1, 1), 0.5);
  double a = 0.1;
  AdaptiveBounds b = adaptive_bounds(a);
  // Oracle: brute-force minimum angle over the knot grid {a, 1/2, 1-a}^3 on the reference cell triangle.
  double vals[3] = {a, 0.5, 1 - a};
  double theta1 = M_PI, theta2 = 0;
  for (double t0 : vals)
    for (double t1 : vals)
      for (double t2 : vals) {
        Vec2 A{0, 0}, B{1, 0}, C{0, 1};
        Vec2 z0 = A * t0 + B * (1 - t0), z1 = B * t1 + C * (1 - t1), z2 = C * t2 + A * (1 - t2);
        for (auto [p, q, r] : {std::tuple{A, z0, z2}, {z0, B, z1}, {z2, z1, C}, {z0, z1, z2}}) {
          TriangleShape s = triangle_shape(p, q, r, 1);
          theta1 = std::min(theta1, s.min_angle);
          theta2 = std::max(theta2, s.max_angle);
        }
      }
  CHECK(b.theta1 <= theta1 + 1e-12);
  CHECK(b.theta2 >= theta2 - 1e-12);
  AdaptiveParams p = AdaptiveParams::uniform(tri->edges.size(), a, a);
  AdaptivePtr m = subdivide(tri, p);
  for (std::size_t s = 0; s < m->tris.size(); ++s) {
    const auto& v = m->tris[s];
    TriangleShape sh = triangle_shape(m->vertices[v[0]], m->vertices[v[1]], m->vertices[v[2]], 0.5);
    CHECK(sh.min_angle >= b.theta1 - 1e-12);
    CHECK(sh.max_angle <= b.theta2 + 1e-12);
  }
}

TEST_CASE("knot parameters outside [a, 1 - a]") {
  MeshPtr tri = mesh_of(rectangle(1, 1), 0.5);
  AdaptiveParams p = AdaptiveParams::uniform(tri->edges.size(), 0.1);
  p.t[3] = 0.05;
  CHECK_THROWS_AS(subdivide(tri, p), ParamOutOfRange);
  p.t[3] = 0.1;
  CHECK_NOTHROW(subdivide(tri, p));
  CHECK_THROWS_AS(subdivide(tri, AdaptiveParams::uniform(tri->edges.size(), 0.6)), ParamOutOfRange);
}

TEST_CASE("sub-edge incidence and crackability") {
  DomainSpec d = stretched_strip(1, 0.5, 0.25, 0.75);
  MeshPtr tri = mesh_of(d, 0.25);
  AdaptivePtr m = midpoint_mesh(tri);
  std::vector<int> incident(m->subedges.size(), 0);
  for (const auto& se : m->tri_subedges)
    for (int id : se) ++incident[id];
  for (std::size_t id = 0; id < m->subedges.size(); ++id) {
    const SubEdge& s = m->subedges[id];
    CHECK(incident[id] == (s.on_boundary() ? 1 : 2));
    // Crackable: inside closure(Ω_B) and not on the Neumann boundary.
    Vec2 mid = (m->vertices[s.v[0]] + m->vertices[s.v[1]]) * 0.5;
    bool in_closure = d.brittle[0].contains(m->vertices[s.v[0]]) && d.brittle[0].contains(m->vertices[s.v[1]]);
    bool neumann = s.label == BoundaryLabel::Neumann || s.label == BoundaryLabel::Traction;
    CHECK_MESSAGE(s.crackable == (in_closure && !neumann), "sub-edge at ", mid.x, ",", mid.y);
  }
  // Halves partition each base edge at its knot.
  for (std::size_t e = 0; e < tri->edges.size(); ++e) {
    int ei = static_cast<int>(e);
    double L = dist(tri->vertices[tri->edges[e].v[0]], tri->vertices[tri->edges[e].v[1]]);
    CHECK(m->subedge_length(m->half_id(ei, 0)) + m->subedge_length(m->half_id(ei, 1)) ==
          doctest::Approx(L).epsilon(1e-14));
  }
}

TEST_CASE("exports") {
  MeshPtr tri = mesh_of(stretched_strip(1, 0.5, 0.25, 0.75), 0.25);
  std::ostringstream os;
  write_mesh_vtk(os, *tri);
  CHECK(os.str().find("POLYGONS 16") != std::string::npos);
  CHECK(os.str().find("CELL_DATA 16") != std::string::npos);
  std::string j = mesh_json(*tri);
  CHECK(j.find("\"vertices\"") != std::string::npos);
  CHECK(j.find("\"edges\"") != std::string::npos);
}
