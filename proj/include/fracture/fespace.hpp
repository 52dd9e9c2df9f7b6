#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fracture/expr.hpp"
#include "fracture/mesh.hpp"

namespace fracture {

using Mat2 = Eigen::Matrix2d;  // gradient: row = component, column = derivative

// Piecewise-affine vector field, discontinuous across the declared topology.
struct DiscreteField {
  AdaptivePtr mesh;
  std::vector<std::array<Vec2, 3>> values;  // per subtriangle, per corner
  std::vector<int> topology;                // sorted sub-edge ids declared open

  static DiscreteField zero(const AdaptivePtr& mesh);

  Mat2 gradient(int s) const;
  Vec2 eval(int s, const std::array<double, 3>& bary) const {
    const auto& v = values[s];
    return v[0] * bary[0] + v[1] * bary[1] + v[2] * bary[2];
  }
  Vec2 eval_at(int s, const Vec2& p) const;
  double scale() const;  // max nodal magnitude + 1
  bool declared(int subedge) const;
};

// Values at the base vertices of a regular triangulation (continuous, affine per base triangle).
struct NodalField {
  std::vector<Vec2> values;

  Vec2 at(const AdaptiveTriangulation& mesh, int vertex) const;
  NodalField operator-(const NodalField& o) const;
  NodalField operator+(const NodalField& o) const;
  NodalField scaled(double s) const;
};

NodalField nodal_interpolant(const VectorFormula& g, const RegularTriangulation& tri, double t);

struct BoundaryDeformation {
  VectorFormula g;
  VectorFormula gdot;

  static BoundaryDeformation from(const VectorFormula& g) { return {g, g.dt()}; }
  NodalField at(const RegularTriangulation& tri, double t) const { return nodal_interpolant(g, tri, t); }
  NodalField rate(const RegularTriangulation& tri, double t) const { return nodal_interpolant(gdot, tri, t); }
};

// The continuous field realized on an adaptive triangulation (empty topology).
DiscreteField lift(const NodalField& g, const AdaptivePtr& mesh);

inline constexpr double kJumpTol = 1e-10;

std::vector<int> jump_set(const DiscreteField& u, double tol = kJumpTol);
std::vector<int> dirichlet_mismatch(const DiscreteField& u, const NodalField& g, double tol = kJumpTol);
std::vector<int> combined_jump(const DiscreteField& u, const NodalField& g, double tol = kJumpTol);

// Corner-value unknowns merged across closed sub-edges. Slot = 3 * subtriangle + corner.
struct DofMap {
  std::vector<int> class_of_slot;
  int num_classes = 0;
  std::vector<char> pinned;        // per class
  std::vector<Vec2> pin_value;     // per class, meaningful when pinned
  std::vector<int> free_index;     // per class, -1 when pinned
  int num_free = 0;
  std::uint64_t hash = 0;          // partition + pin pattern

  int free_unknowns() const { return 2 * num_free; }
  bool same_partition(const DofMap& o) const {
    return hash == o.hash && class_of_slot == o.class_of_slot && pinned == o.pinned;
  }
};

// `g` may be null when no Dirichlet pins apply.
DofMap assemble_dofs(const AdaptiveTriangulation& mesh, const std::vector<int>& topology, const NodalField* g);

// Field from per-class values (pinned classes take their pin value).
DiscreteField reconstruct(const DofMap& dofs, const AdaptivePtr& mesh, const std::vector<Vec2>& class_values,
                          std::vector<int> topology);

struct JumpTarget {
  std::function<int(const Vec2&)> side;                  // region label of a point
  std::function<Vec2(int, const Vec2&)> value;           // target value on a given side
  std::vector<Segment> jumps;                            // jump polyline segments
};

struct InterpolatedField {
  DiscreteField field;
  std::vector<int> zeroed_triangles;  // base triangles set to zero
  std::vector<int> curve_subedges;    // interpolating-curve sub-edges
};

InterpolatedField interpolate_to_fespace(const JumpTarget& target, const MeshPtr& tri, double a);

void write_field_vtk(std::ostream& os, const DiscreteField& u);
std::string field_json(const DiscreteField& u);

}  // namespace fracture
