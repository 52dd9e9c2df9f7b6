#include "fracture/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "fracture/errors.hpp"
#include "fracture/parallel.hpp"

namespace fracture {

TimeGrid TimeGrid::make(double delta, double T) {
  if (!(delta > 0) || !(T > 0)) throw Error("time step and horizon must be positive");
  double r = T / delta;
  if (std::fabs(r - std::round(r)) <= 1e-9 * std::max(1.0, r)) r = std::round(r);
  // N is the largest integer with delta (N - 1) < T.
  long n_minus_1 = static_cast<long>(std::ceil(r)) - 1;
  TimeGrid g;
  g.delta = delta;
  g.T = T;
  for (long i = 0; i <= n_minus_1; ++i) g.knots.push_back(static_cast<double>(i) * delta);
  g.knots.push_back(T);
  return g;
}

Evolution run_evolution(const EvolutionSetup& setup, Evolution* partial, const StepCallback& cb) {
  Evolution ev;
  ev.base = std::make_shared<const RegularTriangulation>(build_structured_mesh(setup.domain, setup.eps));
  ev.g = BoundaryDeformation::from(setup.g);
  coercivity_constants(setup.model, *ev.base, setup.time.T);  // rejects degenerate models
  if (setup.initial_crack.empty()) {
    ev.initial.params = AdaptiveParams::uniform(ev.base->edges.size(), setup.a);
    ev.initial.mesh = subdivide(ev.base, ev.initial.params);
    ev.initial.witness = DiscreteField::zero(ev.initial.mesh);
  } else {
    ev.initial = approximate_initial_crack(setup.initial_crack, ev.base, setup.a);
  }
  CrackSet prev = ev.initial.set;
  AdaptiveParams warm = ev.initial.params;
  try {
    for (std::size_t i = 0; i < setup.time.knots.size(); ++i) {
      StepProblem p;
      p.step = static_cast<int>(i);
      p.t = setup.time.knots[i];
      p.g = ev.g.at(*ev.base, p.t);
      p.prev = prev;
      p.model = setup.model;
      p.base = ev.base;
      p.warm = warm;
      p.options = setup.solver;
      StepSolution sol = step_minimize(p);
      CrackSet gamma = prev;
      gamma.unite(sol.added);
      warm = sol.params;
      prev = gamma;
      ev.times.push_back(p.t);
      ev.steps.push_back(std::move(sol));
      ev.cracks.push_back(std::move(gamma));
      if (cb) cb(static_cast<int>(i), ev);
    }
  } catch (...) {
    if (partial) *partial = ev;
    throw;
  }
  return ev;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Gauss-Legendre, 3 points on [0, 1].
constexpr double kGaussX[3] = {0.1127016653792583, 0.5, 0.8872983346207417};
constexpr double kGaussW[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

DiscreteField plus(const DiscreteField& u, const DiscreteField& w) {
  DiscreteField r = u;
  for (std::size_t s = 0; s < r.values.size(); ++s)
    for (int j = 0; j < 3; ++j) r.values[s][j] += w.values[s][j];
  return r;
}

void add(WorkIntegrals& a, const WorkIntegrals& b) {
  a.W_work += b.W_work;
  a.Fdot += b.Fdot;
  a.F_work += b.F_work;
  a.Gdot += b.Gdot;
  a.G_work += b.G_work;
  a.e_term += b.e_term;
}

}  // namespace

WorkIntegrals interval_work(const DiscreteField& u, const EnergyModel& model, const BoundaryDeformation& g,
                            double s0, double s, double t) {
  WorkIntegrals w;
  if (!(t > s)) return w;
  const RegularTriangulation& base = *u.mesh->base;
  const double h = t - s;
  const NodalField g0 = g.at(base, s0);
  for (int k = 0; k < 3; ++k) {
    double tau = s + h * kGaussX[k];
    double wt = h * kGaussW[k];
    DiscreteField gdot = lift(g.rate(base, tau), u.mesh);
    DerivativeActions A = derivative_actions(tau, u, gdot, model);
    DiscreteField v = plus(u, lift(g.at(base, tau) - g0, u.mesh));
    DerivativeActions B = derivative_actions(tau, v, gdot, model);
    w.W_work += wt * A.dW;
    w.Fdot += wt * A.Fdot;
    w.F_work += wt * A.dF;
    w.Gdot += wt * A.Gdot;
    w.G_work += wt * A.dG;
    w.e_term += wt * (std::fabs(B.dW - A.dW) + std::fabs((B.Fdot + B.dF) - (A.Fdot + A.dF)) +
                      std::fabs((B.Gdot + B.dG) - (A.Gdot + A.dG)));
  }
  return w;
}

WorkIntegrals work_integrals(const Evolution& ev, const EnergyModel& model, double s, double t) {
  WorkIntegrals total;
  for (std::size_t k = 0; k + 1 < ev.times.size(); ++k) {
    double lo = std::max(s, ev.times[k]), hi = std::min(t, ev.times[k + 1]);
    if (hi > lo) add(total, interval_work(ev.steps[k].u, model, ev.g, ev.times[k], lo, hi));
  }
  return total;
}

WorkIntegrals path_work(const DiscreteField& u, const EnergyModel& model, const BoundaryDeformation& g, double s,
                        double t) {
  WorkIntegrals w;
  if (!(t > s)) return w;
  const RegularTriangulation& base = *u.mesh->base;
  const NodalField g0 = g.at(base, s);
  const int pieces = 8;
  for (int piece = 0; piece < pieces; ++piece) {
    double a = s + (t - s) * piece / pieces, h = (t - s) / pieces;
    for (int k = 0; k < 3; ++k) {
      double tau = a + h * kGaussX[k];
      double wt = h * kGaussW[k];
      DiscreteField gdot = lift(g.rate(base, tau), u.mesh);
      DiscreteField v = plus(u, lift(g.at(base, tau) - g0, u.mesh));
      DerivativeActions B = derivative_actions(tau, v, gdot, model);
      w.W_work += wt * B.dW;
      w.Fdot += wt * B.Fdot;
      w.F_work += wt * B.dF;
      w.Gdot += wt * B.Gdot;
      w.G_work += wt * B.dG;
    }
  }
  return w;
}

Ledger build_ledger(const Evolution& ev, const EnergyModel& model) {
  Ledger ledger;
  WorkIntegrals cum;
  for (std::size_t i = 0; i < ev.steps.size(); ++i) {
    const DiscreteField& u = ev.steps[i].u;
    const double t = ev.times[i];
    if (i > 0) add(cum, interval_work(ev.steps[i - 1].u, model, ev.g, ev.times[i - 1], ev.times[i - 1], t));
    LedgerRow r;
    r.t = t;
    r.bulk = bulk_energy(u, model);
    r.body = body_work(t, u, model);
    r.traction = surface_work(t, u, model);
    r.surface = surface_energy(ev.cracks[i], model.surface);
    r.total = r.bulk - r.body - r.traction + r.surface;
    r.W_work = cum.W_work;
    r.Fdot = cum.Fdot;
    r.F_work = cum.F_work;
    r.Gdot = cum.Gdot;
    r.G_work = cum.G_work;
    r.e_term = cum.e_term;
    r.crack_length = ev.cracks[i].length();
    ledger.push_back(r);
  }
  return ledger;
}

namespace {

double budget(const LedgerRow& r) { return r.W_work - r.Fdot - r.F_work - r.Gdot - r.G_work + r.e_term; }

}  // namespace

InequalityReport check_energy_inequality(const Ledger& ledger, double tol) {
  InequalityReport rep;
  rep.worst_margin = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ledger.size(); ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double lhs = ledger[i].total;
      double rhs = ledger[j].total + budget(ledger[i]) - budget(ledger[j]);
      double scale = 1 + std::max(std::fabs(ledger[i].total), std::fabs(ledger[j].total));
      double m = (lhs - rhs) / scale;
      ++rep.pairs;
      if (m > rep.worst_margin) {
        rep.worst_margin = m;
        rep.worst_i = static_cast<int>(i);
        rep.worst_j = static_cast<int>(j);
      }
    }
  if (rep.pairs == 0) rep.worst_margin = 0;
  rep.holds = rep.worst_margin <= tol;
  return rep;
}

bool check_irreversibility(const std::vector<CrackSet>& cracks) {
  for (std::size_t i = 0; i + 1 < cracks.size(); ++i)
    if (!cracks[i].subset_of(cracks[i + 1])) return false;
  return true;
}

bool check_irreversibility(const Evolution& ev) {
  if (!ev.cracks.empty() && !ev.initial.set.subset_of(ev.cracks.front())) return false;
  return check_irreversibility(ev.cracks);
}

AprioriReport check_apriori(const Evolution& ev, const EnergyModel& model, double T) {
  AprioriReport rep;
  CoercivityConstants c = coercivity_constants(model, *ev.base, T);
  rep.gradient_only = c.gradient_only;
  double max_g = -std::numeric_limits<double>::infinity();
  double max_total = -std::numeric_limits<double>::infinity();
  Ledger ledger = build_ledger(ev, model);
  for (std::size_t i = 0; i < ev.steps.size(); ++i) {
    const NodalField g = ev.g.at(*ev.base, ev.times[i]);
    max_g = std::max(max_g, elastic_energy(ev.times[i], lift(g, ev.steps[i].u.mesh), model));
    max_total = std::max(max_total, ledger[i].total);
  }
  rep.bound = (max_g + c.beta0) / c.alpha0;
  rep.crack_bound = (max_total + c.beta0) / model.surface.K1();
  const double p = model.bulk.exponent(), q = model.body.q;
  for (std::size_t i = 0; i < ev.steps.size(); ++i) {
    const DiscreteField& u = ev.steps[i].u;
    double lhs = gradient_norm_pp(u, p);
    if (!c.gradient_only) lhs += field_norm_qq(u, q, model.quadrature);
    double ratio = rep.bound > 0 ? lhs / rep.bound : (lhs > 0 ? std::numeric_limits<double>::infinity() : 0.0);
    rep.worst_ratio = std::max(rep.worst_ratio, ratio);
    double len = ev.cracks[i].length();
    double cr = rep.crack_bound > 0 ? len / rep.crack_bound : (len > 0 ? std::numeric_limits<double>::infinity() : 0.0);
    rep.worst_crack_ratio = std::max(rep.worst_crack_ratio, cr);
  }
  rep.holds = rep.worst_ratio <= 1 + 1e-9 && rep.worst_crack_ratio <= 1 + 1e-9;
  return rep;
}

int step_at(const Evolution& ev, double t) {
  int i = 0;
  for (std::size_t k = 0; k < ev.times.size(); ++k)
    if (ev.times[k] <= t + 1e-12) i = static_cast<int>(k);
  return i;
}

double gradient_difference(const DiscreteField& fine, const DiscreteField& coarse, double p) {
  const auto& rule = triangle_rule(7);
  const AdaptiveTriangulation& m = *fine.mesh;
  double total = 0;
  for (std::size_t s = 0; s < m.tris.size(); ++s) {
    int si = static_cast<int>(s);
    Mat2 Gf = fine.gradient(si);
    const Vec2& p0 = m.vertices[m.tris[s][0]];
    const Vec2& p1 = m.vertices[m.tris[s][1]];
    const Vec2& p2 = m.vertices[m.tris[s][2]];
    double acc = 0;
    for (const auto& qp : rule) {
      Vec2 x = p0 * qp.bary[0] + p1 * qp.bary[1] + p2 * qp.bary[2];
      int cs = coarse.mesh->locate(x);
      if (cs < 0) continue;
      acc += qp.weight * std::pow((Gf - coarse.gradient(cs)).norm(), p);
    }
    total += m.area(si) * acc;
  }
  return std::pow(total, 1.0 / p);
}

std::string StudyReport::table() const {
  std::ostringstream os;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-8s %-6s %-8s %-6s %-14s %-14s %-14s %-12s %-12s %-12s\n", "eps", "a", "delta",
                "t", "elastic", "surface", "total", "d_elastic", "d_surface", "d_grad");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-8.5g %-6.3g %-8.4g %-6.3g %-14.8g %-14.8g %-14.8g %-12.4g %-12.4g %-12.4g\n",
                  r.eps, r.a, r.delta, r.t, r.elastic, r.surface, r.total, r.d_elastic, r.d_surface, r.d_gradient);
    os << buf;
  }
  return os.str();
}

StudyReport refinement_study(EvolutionSetup base, const std::vector<StudyLevel>& levels,
                             const std::vector<double>& samples, int threads) {
  const double T = base.time.T;
  std::vector<Evolution> runs(levels.size());
  parallel_for(static_cast<long>(levels.size()), threads, [&](long n, int) {
    EvolutionSetup s = base;
    s.eps = levels[n].eps;
    s.a = levels[n].a;
    s.time = TimeGrid::make(levels[n].delta, T);
    runs[n] = run_evolution(s);
  });

  StudyReport rep;
  rep.samples = samples;
  rep.levels = static_cast<int>(levels.size());
  const SurfaceDensity& k = base.model.surface;
  for (std::size_t n = 0; n < levels.size(); ++n) {
    double initial = surface_energy(runs[n].initial.set, k);
    for (double t : samples) {
      int i = step_at(runs[n], t);
      const DiscreteField& u = runs[n].steps[i].u;
      StudyRow r{};
      r.eps = levels[n].eps;
      r.a = levels[n].a;
      r.delta = levels[n].delta;
      r.t = t;
      r.elastic = elastic_energy(t, u, base.model);
      r.surface = surface_energy(runs[n].cracks[i], k);
      r.total = r.elastic + r.surface;
      r.crack_length = runs[n].cracks[i].length();
      r.initial_surface = initial;
      r.d_elastic = r.d_surface = r.d_total = r.d_gradient = kNaN;
      if (n > 0) {
        const StudyRow& prev = rep.rows[rep.rows.size() - samples.size()];
        r.d_elastic = std::fabs(r.elastic - prev.elastic);
        r.d_surface = std::fabs(r.surface - prev.surface);
        r.d_total = std::fabs(r.total - prev.total);
        int j = step_at(runs[n - 1], t);
        r.d_gradient = gradient_difference(u, runs[n - 1].steps[j].u, base.model.bulk.exponent());
      }
      rep.rows.push_back(r);
    }
  }
  if (levels.size() >= 3) {
    const std::size_t S = samples.size();
    for (std::size_t k2 = 0; k2 < S; ++k2) {
      const StudyRow& last = rep.rows[(levels.size() - 1) * S + k2];
      const StudyRow& before = rep.rows[(levels.size() - 2) * S + k2];
      double floor_e = 1e-12 * (1 + std::fabs(last.elastic));
      double floor_s = 1e-12 * (1 + std::fabs(last.surface));
      if (last.d_elastic > before.d_elastic + floor_e) rep.elastic_trend = false;
      if (last.d_surface > before.d_surface + floor_s) rep.surface_trend = false;
    }
  }
  return rep;
}

}  // namespace fracture
