// Acceptance harness: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fracture/config.hpp"
#include "fracture/output.hpp"

using namespace fracture;

namespace {

// Tolerances.
constexpr double kInequalityTol = 1e-9;
constexpr double kOracleRel = 1e-9;
constexpr double kOracleFail = 1e-6;
constexpr double kObjectiveFloor = 1e-12;  // relative gaps are taken against max(|objective|, floor)
constexpr double kClosedFormRel = 1e-10;
constexpr double kZeroAbs = 1e-14;
constexpr double kFieldTol = 1e-12;
constexpr double kFdTol = 1e-6;
constexpr double kInitialCrackFinal = 0.05;
constexpr int kToughnessValues = 20;
constexpr int kSuiteSteps = 10;
constexpr int kRandomFields = 10000;

struct Outcome {
  bool pass;
  std::string detail;
};

const std::vector<std::string> kPresets = {"uniform-stretch", "strip-notch", "anisotropic-zigzag"};

struct PresetRun {
  EvolutionSetup setup;
  Evolution ev;
  Ledger ledger;
};

std::map<std::string, PresetRun>& preset_runs() {
  static std::map<std::string, PresetRun> runs;
  if (runs.empty())
    for (const auto& name : kPresets) {
      PresetRun r;
      r.setup = preset_config(name).setup;
      r.ev = run_evolution(r.setup);
      r.ledger = build_ledger(r.ev, r.setup.model);
      runs[name] = std::move(r);
    }
  return runs;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

EvolutionSetup strip_setup(double kappa_s) {
  EvolutionSetup s = preset_config("strip-1d").setup;
  s.model.surface.kappa_s = kappa_s;
  return s;
}

StepProblem first_step(const EvolutionSetup& s, const MeshPtr& base, double t) {
  StepProblem p;
  p.step = 1;
  p.t = t;
  p.g = nodal_interpolant(s.g, *base, t);
  p.model = s.model;
  p.base = base;
  p.warm = AdaptiveParams::uniform(base->edges.size(), s.a);
  p.options = s.solver;
  p.options.mode = SolverMode::Oracle;
  return p;
}

std::vector<double> toughness_values() {
  std::vector<double> out;
  for (int i = 0; i < kToughnessValues; ++i) out.push_back(0.05 * std::pow(100.0, i / (kToughnessValues - 1.0)));
  return out;
}

Outcome irreversibility() {
  std::ostringstream os;
  bool ok = true;
  for (const auto& [name, r] : preset_runs()) {
    bool holds = check_irreversibility(r.ev);
    ok = ok && holds;
    os << name << " " << (holds ? "ok" : "violated") << " (" << r.ev.cracks.size() << " steps, final H1 "
       << fmt(r.ev.cracks.back().length()) << "); ";
  }
  return {ok, os.str()};
}

Outcome energy_inequality() {
  std::ostringstream os;
  bool ok = true;
  for (const auto& [name, r] : preset_runs()) {
    InequalityReport rep = check_energy_inequality(r.ledger, kInequalityTol);
    ok = ok && rep.holds;
    os << name << " worst margin " << fmt(rep.worst_margin) << " at (" << rep.worst_i << ", " << rep.worst_j
       << ") over " << rep.pairs << " pairs; ";
  }
  return {ok, os.str()};
}

Outcome oracle_equivalence() {
  double worst = 0;
  int steps = 0, above = 0, crackable = 0;
  std::ostringstream gaps;
  for (double ks : toughness_values()) {
    EvolutionSetup s = strip_setup(ks);
    double T = 2 * std::sqrt(4 * ks / 3);
    s.time = TimeGrid::make(T / kSuiteSteps, T);
    s.solver.mode = SolverMode::Both;
    MeshPtr base = std::make_shared<const RegularTriangulation>(build_structured_mesh(s.domain, s.eps));
    AdaptivePtr m = subdivide(base, AdaptiveParams::uniform(base->edges.size(), s.a));
    crackable = static_cast<int>(std::count_if(m->subedges.begin(), m->subedges.end(),
                                               [](const SubEdge& e) { return e.crackable; }));
    Evolution ev = run_evolution(s);
    for (std::size_t i = 1; i < ev.steps.size(); ++i) {
      const StepSolution& st = ev.steps[i];
      if (!st.has_gap) return {false, "oracle did not run at kappa_s = " + fmt(ks)};
      double rel = std::fabs(st.gap) / std::max(std::fabs(st.oracle_objective), kObjectiveFloor);
      worst = std::max(worst, rel);
      if (rel > kOracleRel) {
        ++above;
        gaps << " [kappa_s " << fmt(ks) << " t " << fmt(ev.times[i]) << " gap " << fmt(st.gap) << "]";
      }
      ++steps;
    }
  }
  bool ok = worst <= kOracleFail && crackable <= 12 && steps == kToughnessValues * kSuiteSteps;
  std::ostringstream os;
  os << steps << " steps, " << crackable << " crackable sub-edges, worst relative gap " << fmt(worst) << ", "
     << above << " above " << fmt(kOracleRel) << gaps.str();
  return {ok, os.str()};
}

Outcome nucleation() {
  EvolutionSetup s = strip_setup(1.0);
  MeshPtr base = std::make_shared<const RegularTriangulation>(build_structured_mesh(s.domain, s.eps));
  auto cracks = [&](double t) { return !step_minimize_exact(first_step(s, base, t)).realized.empty(); };
  double lo = 0, hi = 4;
  if (cracks(lo) || !cracks(hi)) return {false, "no crossover in [0, 4]"};
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    (cracks(mid) ? hi : lo) = mid;
  }
  const double star = hi;
  const double delta = star / 20;
  s.time = TimeGrid::make(delta, 2 * star);
  Evolution ev = run_evolution(s);
  int first = -1;
  for (std::size_t i = 0; i < ev.cracks.size(); ++i)
    if (!ev.cracks[i].empty()) {
      first = static_cast<int>(i);
      break;
    }
  if (first <= 0) return {false, "evolution never cracked (or cracked at t = 0)"};
  double before = ev.times[first - 1], at = ev.times[first];
  bool ok = before <= star * (1 + 1e-9) && at >= star * (1 - 1e-9) && at - before <= delta * (1 + 1e-9);
  std::ostringstream os;
  os.precision(10);
  os << "sweep crossover " << star << " (closed form " << std::sqrt(4.0 / 3) << "), first cracking step " << first
     << " at t = " << at << ", previous t = " << before << ", delta = " << delta;
  return {ok, os.str()};
}

Outcome uniform_stretch() {
  const PresetRun& r = preset_runs().at("uniform-stretch");
  const double area = r.ev.base->total_area();
  double worst = 0, worst_zero = 0;
  auto rel = [&](double got, double want) {
    if (want == 0) {
      worst_zero = std::max(worst_zero, std::fabs(got));
      return;
    }
    worst = std::max(worst, std::fabs(got - want) / std::fabs(want));
  };
  double frozen = 0;
  for (std::size_t i = 0; i < r.ledger.size(); ++i) {
    const LedgerRow& L = r.ledger[i];
    if (i > 0) frozen += 2 * r.ledger[i - 1].t * (L.t - r.ledger[i - 1].t) * area;
    rel(L.bulk - L.body - L.traction, L.t * L.t * area);
    rel(L.W_work, frozen);
    rel(L.W_work + L.e_term, L.t * L.t * area);
    rel(L.Fdot, 0);
    rel(L.F_work, 0);
    rel(L.Gdot, 0);
    rel(L.G_work, 0);
    rel(L.surface, 0);
    WorkIntegrals w = path_work(r.ev.steps[0].u, r.setup.model, r.ev.g, 0, L.t);
    rel(w.W_work, L.t * L.t * area);
  }
  bool ok = worst <= kClosedFormRel && worst_zero <= kZeroAbs;
  return {ok, std::to_string(r.ledger.size()) + " steps, worst relative error " + fmt(worst) +
                  ", worst zero-form magnitude " + fmt(worst_zero)};
}

Outcome lemma() {
  const std::vector<double> angles = {0, 17, 30, 45};
  LemmaSpec spec;
  spec.segments = angle_segments(angles);
  spec.eps = {1.0 / 64};
  spec.a = {0.4, 0.2, 0.1, 0.05};
  DomainSpec square;
  square.polygon = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  SurfaceDensity iso;
  std::vector<LemmaRow> rows = lemma_table(spec, square, iso);
  std::map<std::pair<int, double>, double> err;
  for (const auto& r : rows) err[{r.segment, r.a}] = r.rel_error;
  double C = 0;
  for (int s = 0; s < 4; ++s)
    for (double a : {0.4, 0.2}) C = std::max(C, err[{s, a}] / a);
  bool ok = true;
  std::ostringstream os;
  os << "fitted C = " << fmt(C) << ";";
  for (int s = 0; s < 4; ++s) {
    for (double a : {0.1, 0.05}) ok = ok && err[{s, a}] <= C * a;
    if (angles[s] != 0) ok = ok && err[{s, 0.05}] <= 0.5 * err[{s, 0.4}];
    os << " " << angles[s] << " deg: " << fmt(err[{s, 0.4}]) << " -> " << fmt(err[{s, 0.05}]) << ";";
  }
  return {ok, os.str()};
}

Outcome refinement() {
  RunConfig cfg = preset_config("strip-notch");
  const double T = cfg.setup.time.T;
  std::vector<StudyLevel> levels = {{1.0 / 8, 0.2, T / 10}, {1.0 / 16, 0.1, T / 20}, {1.0 / 32, 0.05, T / 40}};
  StudyReport rep = refinement_study(cfg.setup, levels, cfg.study_samples, 1);
  bool ok = rep.elastic_trend && rep.surface_trend;
  std::string detail = std::string("elastic trend ") + (rep.elastic_trend ? "non-increasing" : "INCREASING") +
                       ", surface trend " + (rep.surface_trend ? "non-increasing" : "INCREASING");
  if (!ok) detail += "\n" + rep.table();
  return {ok, detail};
}

Outcome initial_crack() {
  DomainSpec d = preset_config("strip-notch").setup.domain;
  const Segment notch{{0.0, 0.1406}, {0.2979, 0.3594}};
  SurfaceDensity iso;
  const double exact = iso.cost(notch.p0, notch.p1);
  const std::vector<std::pair<double, double>> seq = {{1.0 / 8, 0.2}, {1.0 / 16, 0.1}, {1.0 / 32, 0.05}};
  std::vector<double> errs;
  for (auto [eps, a] : seq) {
    MeshPtr base = std::make_shared<const RegularTriangulation>(build_structured_mesh(d, eps));
    InitialCrack c = approximate_initial_crack({notch}, base, a);
    errs.push_back(std::fabs(surface_energy(c.set, iso) - exact));
  }
  bool ok = errs.back() <= kInitialCrackFinal * exact;
  for (std::size_t i = 1; i < errs.size(); ++i) ok = ok && errs[i] < errs[i - 1];
  std::ostringstream os;
  os << "exact " << fmt(exact) << ", errors";
  for (double e : errs) os << " " << fmt(e);
  os << " (final ratio " << fmt(errs.back() / exact) << ")";
  return {ok, os.str()};
}

Outcome determinism() {
  EvolutionSetup s = strip_setup(1.0);
  s.model.body.kappa = 0.2;
  s.model.body.set_load(VectorFormula::parse("0.05*t", "0.02"));
  s.model.degenerate_ok = false;
  s.solver.mode = SolverMode::Oracle;
  s.solver.band = {{0.3, 0.05, 0.45, 0.2}};
  s.time = TimeGrid::make(0.15, 1.5);
  EvolutionSetup b = s;
  s.solver.order_seed = 0;
  s.solver.threads = 1;
  b.solver.order_seed = 0x5eed1234abcdull;
  b.solver.threads = 3;
  Evolution ea = run_evolution(s), eb = run_evolution(b);
  if (ea.steps.size() != eb.steps.size()) return {false, "step counts differ"};
  double worst = 0;
  bool cracks_equal = true, meshes_equal = true;
  for (std::size_t i = 0; i < ea.steps.size(); ++i) {
    cracks_equal = cracks_equal && ea.cracks[i] == eb.cracks[i];
    const auto &ua = ea.steps[i].u, &ub = eb.steps[i].u;
    if (ea.steps[i].params.t != eb.steps[i].params.t || ua.values.size() != ub.values.size()) {
      meshes_equal = false;
      continue;
    }
    for (std::size_t k = 0; k < ua.values.size(); ++k)
      for (int j = 0; j < 3; ++j) worst = std::max(worst, norm(ua.values[k][j] - ub.values[k][j]));
  }
  bool cracked = !ea.cracks.back().empty();
  bool ok = cracks_equal && meshes_equal && worst <= kFieldTol;
  std::ostringstream os;
  os << ea.steps.size() << " steps, crack sets " << (cracks_equal ? "equal" : "DIFFER") << ", knots "
     << (meshes_equal ? "equal" : "DIFFER") << ", worst field difference " << fmt(worst)
     << (cracked ? ", evolution cracks" : ", evolution stays intact");
  return {ok, os.str()};
}

Outcome properties() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> U(-1, 1);
  int failures = 0, checks = 0;
  auto expect = [&](bool c) {
    ++checks;
    if (!c) ++failures;
  };
  const double h = 1e-5;
  // Bulk growth and derivatives.
  for (double p : {1.5, 2.0, 3.0}) {
    BulkDensity W;
    W.variant = BulkVariant::PNorm;
    W.mu = 1.3;
    W.p = p;
    for (int i = 0; i < 200; ++i) {
      Mat2 xi, dir;
      xi << U(rng), U(rng), U(rng), U(rng);
      dir << U(rng), U(rng), U(rng), U(rng);
      double n = xi.norm();
      expect(W.W(xi) >= W.a0() * std::pow(n, p) * (1 - 1e-12));
      expect(W.W(xi) <= W.a1() * std::pow(n, p) * (1 + 1e-12));
      expect(W.dW(xi).norm() <= W.a2() * std::pow(n, p - 1) * (1 + 1e-12));
      double fd = (W.W(xi + h * dir) - W.W(xi - h * dir)) / (2 * h);
      double an = (W.dW(xi).array() * dir.array()).sum();
      expect(std::fabs(an - fd) <= kFdTol * (1 + std::fabs(fd)));
    }
  }
  // Body potential derivatives.
  for (double q : {1.5, 2.0, 3.0}) {
    BodyPotential F;
    F.kappa = 0.4;
    F.q = q;
    F.set_load(VectorFormula::parse("t*x - 1", "cos(t)*y"));
    for (int i = 0; i < 200; ++i) {
      double t = std::fabs(U(rng));
      Vec2 x{U(rng), U(rng)}, z{2 * U(rng), 2 * U(rng)}, w{U(rng), U(rng)};
      if (norm(z) < 0.1) continue;
      double fd = (F.F(t, x, z + w * h) - F.F(t, x, z - w * h)) / (2 * h);
      expect(std::fabs(dot(F.dF(t, x, z), w) - fd) <= kFdTol * (1 + std::fabs(fd)));
      double tfd = (F.F(t + h, x, z) - F.F(t - h, x, z)) / (2 * h);
      expect(std::fabs(F.Fdot(t, x, z) - tfd) <= kFdTol * (1 + std::fabs(tfd)));
    }
  }
  // Coercivity on random fields for the preset with body forces and traction.
  {
    EvolutionSetup s = preset_config("anisotropic-zigzag").setup;
    MeshPtr base = std::make_shared<const RegularTriangulation>(build_structured_mesh(s.domain, 0.125));
    AdaptivePtr m = subdivide(base, AdaptiveParams::uniform(base->edges.size(), s.a));
    CoercivityConstants c = coercivity_constants(s.model, *base, s.time.T);
    expect(c.alpha0 > 0);
    std::uniform_real_distribution<double> E(-3, 1), T01(0, 1);
    for (int i = 0; i < kRandomFields; ++i) {
      double scale = std::pow(10.0, E(rng));
      DiscreteField u = DiscreteField::zero(m);
      for (auto& tri : u.values)
        for (auto& v : tri) v = {scale * U(rng), scale * U(rng)};
      double t = T01(rng) * s.time.T;
      double lhs = elastic_energy(t, u, s.model);
      double rhs = c.alpha0 * (gradient_norm_pp(u, s.model.bulk.exponent()) + field_norm_qq(u, s.model.body.q)) -
                   c.beta0;
      expect(lhs >= rhs - 1e-12 * (1 + std::fabs(rhs)));
    }
    // Surface density against K1 and K2.
    const SurfaceDensity& k = s.model.surface;
    for (int i = 0; i < kRandomFields; ++i) {
      Vec2 nu{U(rng), U(rng)};
      expect(k.k(nu) >= k.K1() * norm(nu) * (1 - 1e-12));
      expect(k.k(nu) <= k.K2() * norm(nu) * (1 + 1e-12));
    }
  }
  // A-priori bound at every evolution step.
  std::ostringstream ap;
  for (const auto& [name, r] : preset_runs()) {
    AprioriReport rep = check_apriori(r.ev, r.setup.model, r.setup.time.T);
    expect(rep.holds);
    ap << " " << name << " " << fmt(rep.worst_ratio) << "/" << fmt(rep.worst_crack_ratio);
  }
  std::ostringstream os;
  os << checks << " checks, " << failures << " failures; a-priori worst ratios (norm/crack):" << ap.str();
  return {failures == 0, os.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"irreversibility", irreversibility},
      {"energy inequality", energy_inequality},
      {"oracle equivalence", oracle_equivalence},
      {"nucleation threshold", nucleation},
      {"uniform-stretch closed form", uniform_stretch},
      {"interpolating-curve energy error", lemma},
      {"refinement proxy", refinement},
      {"initial-crack energy approximation", initial_crack},
      {"determinism", determinism},
      {"property suites", properties},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failed;
    std::printf("%s [%zu] %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
