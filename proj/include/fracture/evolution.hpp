#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fracture/crack.hpp"
#include "fracture/fespace.hpp"
#include "fracture/mesh.hpp"
#include "fracture/model.hpp"
#include "fracture/solver.hpp"

namespace fracture {

struct TimeGrid {
  double delta = 0;
  double T = 0;
  std::vector<double> knots;  // t_0 = 0 < ... < t_N = T

  static TimeGrid make(double delta, double T);
  int steps() const { return static_cast<int>(knots.size()) - 1; }
};

struct EvolutionSetup {
  DomainSpec domain;
  double eps = 0.125;
  double a = 0.25;
  TimeGrid time;
  EnergyModel model;
  VectorFormula g;
  Polyline initial_crack;
  SolverOptions solver;
};

struct Evolution {
  MeshPtr base;
  BoundaryDeformation g;
  InitialCrack initial;
  std::vector<double> times;
  std::vector<StepSolution> steps;
  std::vector<CrackSet> cracks;  // cumulative Gamma^i
};

struct LedgerRow {
  double t = 0;
  double bulk = 0;
  double body = 0;
  double traction = 0;
  double surface = 0;
  double total = 0;
  // Cumulative from t_0, u frozen on each interval.
  double W_work = 0;
  double Fdot = 0;
  double F_work = 0;
  double Gdot = 0;
  double G_work = 0;
  double e_term = 0;
  double crack_length = 0;
};

using Ledger = std::vector<LedgerRow>;

// Called after each completed step (step index, evolution so far).
using StepCallback = std::function<void(int, const Evolution&)>;

// On a solver error the partial evolution is left in *partial (when given) and the error rethrown.
Evolution run_evolution(const EvolutionSetup& setup, Evolution* partial = nullptr, const StepCallback& cb = {});

struct WorkIntegrals {
  double W_work = 0;
  double Fdot = 0;
  double F_work = 0;
  double Gdot = 0;
  double G_work = 0;
  double e_term = 0;
};

// Integrals over [s, t] (s, t in [t_j, t_{j+1}]) with u frozen, Gauss order 3 in tau. The error term
// compares with the competitor path u + g(tau) - g(s_0), s_0 the left end of the step interval.
WorkIntegrals interval_work(const DiscreteField& u, const EnergyModel& model, const BoundaryDeformation& g,
                            double s0, double s, double t);

// Accumulated frozen work integrals of an evolution over [s, t].
WorkIntegrals work_integrals(const Evolution& ev, const EnergyModel& model, double s, double t);

// Work integrals along the field path v(tau) = u + g(tau) - g(s) on [s, t].
WorkIntegrals path_work(const DiscreteField& u, const EnergyModel& model, const BoundaryDeformation& g, double s,
                        double t);

Ledger build_ledger(const Evolution& ev, const EnergyModel& model);

struct InequalityReport {
  bool holds = true;
  double worst_margin = 0;  // max over pairs of lhs - rhs (normalized by 1 + |E|)
  int worst_i = 0;
  int worst_j = 0;
  int pairs = 0;
};

InequalityReport check_energy_inequality(const Ledger& ledger, double tol = 1e-9);
bool check_irreversibility(const std::vector<CrackSet>& cracks);
bool check_irreversibility(const Evolution& ev);

struct AprioriReport {
  bool holds = true;
  double bound = 0;
  double worst_ratio = 0;  // max over steps of norms / bound
  double crack_bound = 0;  // H^1 bound from the surface coercivity
  double worst_crack_ratio = 0;
  bool gradient_only = false;
};

AprioriReport check_apriori(const Evolution& ev, const EnergyModel& model, double T);

// Piecewise-constant interpolant: index i with t_i <= t < t_{i+1}.
int step_at(const Evolution& ev, double t);

// ||grad u - grad v||_p on the finer field's subtriangles (7-point rule, coarse field located pointwise).
double gradient_difference(const DiscreteField& fine, const DiscreteField& coarse, double p);

struct StudyLevel {
  double eps;
  double a;
  double delta;
};

struct StudyRow {
  double eps, a, delta, t;
  double elastic, surface, total, crack_length;
  double initial_surface;
  // Differences to the previous level (NaN on the first level).
  double d_elastic, d_surface, d_total, d_gradient;
};

struct StudyReport {
  std::vector<StudyRow> rows;
  std::vector<double> samples;
  int levels = 0;
  // Non-increasing successive differences between the last two refinement pairs.
  bool elastic_trend = true;
  bool surface_trend = true;
  std::string table() const;
};

// `threads` independent runs in parallel; each run uses setup.solver.threads for its steps.
StudyReport refinement_study(EvolutionSetup base, const std::vector<StudyLevel>& levels,
                             const std::vector<double>& samples, int threads = 1);

}  // namespace fracture
