#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "fracture/geometry.hpp"

namespace fracture {

enum class Region : std::uint8_t { Elastic, Brittle };

// Traction edges are Neumann edges carrying surface forces.
enum class BoundaryLabel : std::uint8_t { Interior, Dirichlet, Neumann, Traction };

const char* to_string(BoundaryLabel label);

struct Rect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool contains(const Vec2& p, double tol = 0.0) const {
    return p.x >= x0 - tol && p.x <= x1 + tol && p.y >= y0 - tol && p.y <= y1 + tol;
  }
};

struct LabelSegment {
  Vec2 a;
  Vec2 b;
  BoundaryLabel label = BoundaryLabel::Neumann;
};

struct DomainSpec {
  std::vector<Vec2> polygon;  // rectilinear, counterclockwise
  std::vector<Rect> brittle;
  std::vector<LabelSegment> boundary;  // unlabelled boundary is Neumann
  bool exterior_collar = false;

  double area() const;
  bool contains(const Vec2& p) const;
};

inline constexpr double kSqrt2 = 1.4142135623730951;
inline constexpr double kStructuredC1 = 1.0 / (1.0 + kSqrt2);
inline constexpr double kStructuredC2 = kSqrt2;

struct Edge {
  std::array<int, 2> v{-1, -1};  // v[0] < v[1]
  std::array<int, 2> tri{-1, -1};
  BoundaryLabel label = BoundaryLabel::Interior;
  bool on_boundary() const { return tri[1] < 0; }
};

struct RegularTriangulation {
  double eps = 0;
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;   // counterclockwise
  std::vector<std::array<int, 3>> tri_edges;   // local edge j joins corners j and j+1
  std::vector<Edge> edges;
  std::vector<Region> region;
  std::vector<char> in_omega_s;  // elastic triangles touching traction edges
  DomainSpec domain;

  double c1 = kStructuredC1;
  double c2 = kStructuredC2;
  double theta1 = 0.7853981633974483;
  double theta2 = 1.5707963267948966;

  // Structured lookup (empty for hand-built meshes).
  Vec2 origin;
  int nx = 0;
  int ny = 0;
  std::vector<std::array<int, 2>> cell_tris;

  double area(int tri) const;
  Vec2 centroid(int tri) const;
  int edge_between(int a, int b) const;
  int locate(const Vec2& p) const;
  double total_area() const;
  bool edge_in_brittle_closure(int e) const;
};

using MeshPtr = std::shared_ptr<const RegularTriangulation>;

// Generic constructor for hand-built meshes: boundary edges Neumann, all elastic.
RegularTriangulation make_triangulation(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> triangles,
                                        double eps);

RegularTriangulation build_structured_mesh(const DomainSpec& domain, double eps);

struct RegularityReport {
  double min_inradius_ratio = 0;       // min 2r/eps
  double max_circumdiameter_ratio = 0; // max enclosing-disc diameter / eps
  double min_angle = 0;                // radians
  double max_angle = 0;
  double min_edge_ratio = 0;
  double max_edge_ratio = 0;
  bool pass = false;
};

RegularityReport check_regularity(const RegularTriangulation& tri);

struct TriangleShape {
  double inradius_ratio;
  double enclosing_ratio;
  double min_angle;
  double max_angle;
  double min_edge;
  double max_edge;
};

TriangleShape triangle_shape(const Vec2& a, const Vec2& b, const Vec2& c, double eps);

struct AdaptiveParams {
  double a = 0.25;
  std::vector<double> t;

  static AdaptiveParams uniform(std::size_t edges, double a, double value = 0.5) {
    return {a, std::vector<double>(edges, value)};
  }
};

enum class SubEdgeKind : std::uint8_t { Half, Interior };

struct SubEdge {
  std::array<int, 2> v{-1, -1};
  std::array<int, 2> tri{-1, -1};
  SubEdgeKind kind = SubEdgeKind::Half;
  int base = -1;  // base edge (Half) or base triangle (Interior)
  int sub = 0;    // side 0/1 (Half) or k = 0..2 (Interior)
  BoundaryLabel label = BoundaryLabel::Interior;
  bool crackable = false;
  bool on_boundary() const { return tri[1] < 0; }
};

// Four-way subdivision of a regular triangulation. Vertex ids: base vertices first,
// then one knot per base edge (id = nV + e). Subtriangle 4T+j, j = 0..2 corner at
// base corner j, j = 3 central. Sub-edge ids: 2e+side for halves of base edge e
// (side 0 from v[0] to the knot), 2nE + 3T + k for interior adaptive edges.
struct AdaptiveTriangulation {
  MeshPtr base;
  AdaptiveParams params;
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> tris;
  std::vector<std::array<int, 3>> tri_subedges;  // local edge j joins corners j and j+1
  std::vector<SubEdge> subedges;

  int half_id(int e, int side) const { return 2 * e + side; }
  int interior_id(int T, int k) const { return 2 * static_cast<int>(base->edges.size()) + 3 * T + k; }
  int knot_vertex(int e) const { return static_cast<int>(base->vertices.size()) + e; }
  double area(int s) const;
  Region region(int s) const { return base->region[s / 4]; }
  int locate(const Vec2& p) const;
  double subedge_length(int id) const { return dist(vertices[subedges[id].v[0]], vertices[subedges[id].v[1]]); }
  bool is_base_vertex(int v) const { return v < static_cast<int>(base->vertices.size()); }
};

using AdaptivePtr = std::shared_ptr<const AdaptiveTriangulation>;

AdaptivePtr subdivide(const MeshPtr& tri, const AdaptiveParams& params);

// For interior adaptive edge k of a base triangle: the two local base edges whose
// knots it joins (k0: edges 0 and 2, k1: edges 1 and 0, k2: edges 2 and 1).
std::array<int, 2> interior_edge_locals(int k);

struct AdaptiveBounds {
  double theta1, theta2;  // radians
  double c1, c2;          // inradius and enclosing-disc ratios w.r.t. eps
  double min_edge, max_edge;
};

// Shape bounds of the subdivided right-isoceles cell over the knot grid
// {a, a + h, ..., 1 - a} with `points` values per edge (3 gives {a, 1/2, 1-a}).
AdaptiveBounds adaptive_bounds(double a, int points = 3);

void write_mesh_vtk(std::ostream& os, const RegularTriangulation& tri);
void write_mesh_vtk(std::ostream& os, const AdaptiveTriangulation& tri);
std::string mesh_json(const RegularTriangulation& tri);

}  // namespace fracture
