#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fracture/crack.hpp"
#include "fracture/fespace.hpp"
#include "fracture/mesh.hpp"
#include "fracture/model.hpp"

namespace fracture {

enum class SolverMode { Oracle, Heuristic, Both };

const char* to_string(SolverMode mode);
SolverMode parse_solver_mode(const std::string& name);

struct SolverOptions {
  SolverMode mode = SolverMode::Oracle;
  int cap = 20;                // max crackable sub-edges for the oracle
  int grid_points = 3;         // knot values per edge in the band (1..7)
  std::vector<double> knot_values;  // explicit band grid, overrides grid_points
  std::vector<Rect> band;      // edges whose midpoint lies here get the full grid
  bool full_grid = false;      // every crackable edge gets the full grid
  double newton_tol = 1e-10;
  int newton_max_iter = 200;
  int threads = 1;
  std::uint64_t order_seed = 0;  // nonzero: permuted enumeration order
  int max_moves = 10000;
};

struct StepProblem {
  int step = 0;
  double t = 0;
  NodalField g;
  CrackSet prev;
  EnergyModel model;
  MeshPtr base;
  AdaptiveParams warm;  // knots of the previous step
  SolverOptions options;
};

struct SolveStats {
  int solves = 0;
  int newton_iterations = 0;
  int floating_components = 0;
  int unbalanced_components = 0;  // floating components with non-zero load resultant
};

struct StepSolution {
  DiscreteField u;
  AdaptiveParams params;
  std::vector<int> realized;  // S^g(u) as sub-edge ids of u.mesh
  CrackSet added;             // realized edges as a crack set
  double elastic = 0;
  double surface_increment = 0;
  double objective = 0;
  // Diagnostics.
  SolveStats stats;
  long evaluations = 0;
  long grid_size = 0;
  int moves = 0;
  double oracle_objective = 0;
  double gap = 0;  // heuristic minus oracle (Both mode)
  bool has_gap = false;
};

// Per-edge knot candidates used by both minimizers.
std::vector<std::vector<double>> knot_grid(const StepProblem& problem);

// Crackable sub-edges of `mesh` fully covered by the previous crack.
std::vector<int> covered_subedges(const AdaptiveTriangulation& mesh, const CrackSet& prev);

// Minimizer of the elastic energy at t with the given open sub-edges and Dirichlet pins.
DiscreteField elastic_solve(const AdaptivePtr& mesh, const std::vector<int>& topology, const StepProblem& problem,
                            SolveStats* stats = nullptr);

struct StepObjective {
  double elastic = 0;
  double surface_increment = 0;
  double total = 0;
  std::vector<int> realized;
};

// Elastic energy plus the surface energy of S^g(v) not covered by the previous crack.
StepObjective step_objective(const DiscreteField& v, const StepProblem& problem);

StepSolution step_minimize_exact(const StepProblem& problem);
StepSolution step_minimize_heuristic(const StepProblem& problem);
// Dispatches on problem.options.mode; Both runs the two and reports the gap.
StepSolution step_minimize(const StepProblem& problem);

struct Competitor {
  std::string kind;
  DiscreteField v;
};

using CompetitorSampler = std::function<std::vector<Competitor>(const StepSolution&, const StepProblem&)>;

// Random topologies, perturbed fields, the boundary datum and fields transferred through a random jump line.
CompetitorSampler default_sampler(int count, std::uint64_t seed);

struct AuditReport {
  int competitors = 0;
  int violations = 0;
  double worst = 0;  // max over competitors of solution - competitor objective
  std::string worst_kind;
};

AuditReport minimality_audit(const StepSolution& solution, const StepProblem& problem, const CompetitorSampler& sampler,
                             double tol = 1e-9);

}  // namespace fracture
