#pragma once

#include <memory>
#include <random>

#include "fracture/config.hpp"
#include "fracture/crack.hpp"
#include "fracture/evolution.hpp"
#include "fracture/fespace.hpp"
#include "fracture/mesh.hpp"
#include "fracture/model.hpp"
#include "fracture/solver.hpp"

namespace testing {

using namespace fracture;

inline DomainSpec rectangle(double w, double h) {
  DomainSpec d;
  d.polygon = {{0, 0}, {w, 0}, {w, h}, {0, h}};
  return d;
}

// Rectangle with Dirichlet ends at x = 0 and x = w and a brittle column [bx0, bx1] x [0, h].
inline DomainSpec stretched_strip(double w, double h, double bx0, double bx1) {
  DomainSpec d = rectangle(w, h);
  d.brittle = {{bx0, 0, bx1, h}};
  d.boundary = {{{w, 0}, {w, h}, BoundaryLabel::Dirichlet}, {{0, h}, {0, 0}, BoundaryLabel::Dirichlet}};
  return d;
}

inline MeshPtr mesh_of(const DomainSpec& d, double eps) {
  return std::make_shared<const RegularTriangulation>(build_structured_mesh(d, eps));
}

inline AdaptivePtr midpoint_mesh(const MeshPtr& tri, double a = 0.25) {
  return subdivide(tri, AdaptiveParams::uniform(tri->edges.size(), a));
}

inline EnergyModel quadratic_model(double mu = 1, double kappa = 0, double kappa_s = 1) {
  EnergyModel m;
  m.bulk.variant = BulkVariant::Quadratic;
  m.bulk.mu = mu;
  m.body.kappa = kappa;
  m.surface.kappa_s = kappa_s;
  m.degenerate_ok = kappa == 0;
  return m;
}

// Independent affine field per subtriangle with random corner values.
inline DiscreteField random_broken_field(const AdaptivePtr& mesh, std::mt19937_64& rng, double scale = 1) {
  std::uniform_real_distribution<double> U(-scale, scale);
  DiscreteField u = DiscreteField::zero(mesh);
  for (auto& tri : u.values)
    for (auto& v : tri) v = {U(rng), U(rng)};
  return u;
}

// Continuous field from a formula evaluated at subtriangle corners.
template <class Fn>
DiscreteField field_from(const AdaptivePtr& mesh, Fn fn) {
  DiscreteField u = DiscreteField::zero(mesh);
  for (std::size_t s = 0; s < mesh->tris.size(); ++s)
    for (int j = 0; j < 3; ++j) u.values[s][j] = fn(mesh->vertices[mesh->tris[s][j]]);
  return u;
}

// Single-step problem of a setup at time t.
inline StepProblem step_problem(const EvolutionSetup& setup, const MeshPtr& base, double t, CrackSet prev = {},
                                int step = 1) {
  StepProblem p;
  p.step = step;
  p.t = t;
  p.g = nodal_interpolant(setup.g, *base, t);
  p.prev = std::move(prev);
  p.model = setup.model;
  p.base = base;
  p.warm = AdaptiveParams::uniform(base->edges.size(), setup.a);
  p.options = setup.solver;
  return p;
}

inline double rel_diff(double a, double b) { return std::fabs(a - b) / std::max(1.0, std::max(std::fabs(a), std::fabs(b))); }

}  // namespace testing
