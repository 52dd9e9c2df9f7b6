#pragma once

#include <compare>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fracture/fespace.hpp"
#include "fracture/mesh.hpp"

namespace fracture {

struct SurfaceDensity;

using Polyline = std::vector<Segment>;

// Geometric identity of a sub-edge, independent of the triangulation it came from.
// Half: base edge + parameter interval [s0, s1] measured from the edge's first vertex.
// Interior: base triangle + k + knot parameters of the two base edges it joins.
struct SubEdgeKey {
  SubEdgeKind kind = SubEdgeKind::Half;
  int base = -1;
  int sub = 0;
  double s0 = 0;
  double s1 = 0;
  auto operator<=>(const SubEdgeKey&) const = default;
};

struct CrackEdge {
  SubEdgeKey key;
  Vec2 p0;
  Vec2 p1;
  double base_length = 0;  // length of the base edge (Half keys)
  int step_added = -1;     // -1: initial crack

  double length() const;
};

SubEdgeKey subedge_key(const AdaptiveTriangulation& mesh, int id);
CrackEdge crack_edge(const AdaptiveTriangulation& mesh, int id, int step);

class CrackSet {
 public:
  // Adds an edge; an existing edge keeps its provenance. Returns true when new.
  bool insert(const CrackEdge& edge);
  void unite(const CrackSet& other);
  bool contains(const SubEdgeKey& key) const { return edges_.count(key) != 0; }
  bool subset_of(const CrackSet& other) const;
  bool empty() const { return edges_.empty(); }
  std::size_t size() const { return edges_.size(); }
  const std::map<SubEdgeKey, CrackEdge>& edges() const { return edges_; }
  void erase(const SubEdgeKey& key) { edges_.erase(key); }

  // Length of `edge` not covered by this set (exact interval arithmetic on base edges).
  double uncovered_length(const CrackEdge& edge) const;
  bool covers(const CrackEdge& edge) const { return uncovered_length(edge) == 0.0; }

  double length() const;  // H^1 of the union
  // Knot parameters referenced on base edge e (needs the base mesh for interior keys).
  std::vector<double> knots_on_edge(const RegularTriangulation& tri, int e) const;

  friend bool operator==(const CrackSet& a, const CrackSet& b);

 private:
  std::vector<std::pair<double, double>> merged_intervals(int base_edge) const;
  std::map<SubEdgeKey, CrackEdge> edges_;
};

CrackSet crack_set_from(const AdaptiveTriangulation& mesh, const std::vector<int>& ids, int step);

double surface_energy(const CrackSet& gamma, const SurfaceDensity& k);
double incremental_surface_energy(const CrackSet& added, const CrackSet& prev, const SurfaceDensity& k);
// Surface energy of the part of `added` covered by `prev`.
double covered_surface_energy(const CrackSet& added, const CrackSet& prev, const SurfaceDensity& k);

struct InterpolatingCurve {
  Polyline polyline;
  std::vector<std::pair<int, double>> knots;     // (base edge, clamped knot parameter)
  std::vector<std::pair<int, int>> interior;     // (base triangle, k)
  std::vector<double> crossing_params;           // unclamped knot parameters, aligned with `knots`
};

InterpolatingCurve interpolating_curve(const Segment& s, const RegularTriangulation& tri, double a);

struct InitialCrack {
  AdaptiveParams params;
  AdaptivePtr mesh;
  std::vector<int> subedges;
  CrackSet set;
  DiscreteField witness;
};

InitialCrack approximate_initial_crack(const Polyline& gamma0, const MeshPtr& tri, double a);

std::string crack_json(const CrackSet& gamma);

}  // namespace fracture
