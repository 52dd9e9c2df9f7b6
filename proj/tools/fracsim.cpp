// fracsim: quasistatic brittle fracture on adaptive triangulations.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fracture/config.hpp"
#include "fracture/evolution.hpp"
#include "fracture/output.hpp"
#include "fracture/solver.hpp"

using namespace fracture;

namespace {

struct Common {
  std::string config;
  std::string out;
  int threads = 0;
  long long seed = -1;
  std::string solver;
};

RunConfig load(const Common& c) {
  if (c.config.empty()) throw ConfigError("--config is required");
  RunConfig cfg = c.config.rfind("preset:", 0) == 0 ? preset_config(c.config.substr(7)) : load_config(c.config);
  if (c.threads > 0) cfg.setup.solver.threads = c.threads;
  if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
  if (!c.solver.empty()) cfg.setup.solver.mode = parse_solver_mode(c.solver);
  if (const char* env = std::getenv("FRACSIM_OUT"); env && *env) cfg.output = env;
  if (!c.out.empty()) cfg.output = c.out;
  return cfg;
}

void add_common(CLI::App* app, Common& c, bool solver_flags = true) {
  app->add_option("--config", c.config, "config file, or preset:NAME");
  app->add_option("--out", c.out, "output directory (overrides the config and FRACSIM_OUT)");
  if (!solver_flags) return;
  app->add_option("--threads", c.threads, "worker threads");
  app->add_option("--seed", c.seed, "competitor sampling seed");
  app->add_option("--solver", c.solver, "step minimizer")->check(CLI::IsMember({"oracle", "heuristic", "both"}));
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    Expr e = Expr::parse(item);
    if (!e.is_constant()) throw ConfigError("expected a constant, got '" + item + "'");
    out.push_back(e.eval(0, 0, 0));
  }
  return out;
}

int cmd_validate(const Common& c) {
  RunConfig cfg = load(c);
  validate_config(cfg);
  const EvolutionSetup& s = cfg.setup;
  RegularTriangulation tri = build_structured_mesh(s.domain, s.eps);
  CoercivityConstants k = coercivity_constants(s.model, tri, s.time.T);
  int crackable = 0;
  for (std::size_t e = 0; e < tri.edges.size(); ++e) crackable += tri.edge_in_brittle_closure(static_cast<int>(e));
  std::printf("ok: %s\n", cfg.source.c_str());
  std::printf("  mesh: %zu vertices, %zu triangles, %zu edges (%d in closure of the brittle region)\n",
              tri.vertices.size(), tri.triangles.size(), tri.edges.size(), crackable);
  std::printf("  regularity: c1 = %.6g, c2 = %.6g\n", tri.c1, tri.c2);
  std::printf("  time grid: %d steps, delta = %.6g, T = %.6g\n", s.time.steps(), s.time.delta, s.time.T);
  std::printf("  coercivity: alpha0 = %.6g, beta0 = %.6g%s\n", k.alpha0, k.beta0,
              k.gradient_only ? " (gradient term only)" : "");
  std::printf("  surface: K1 = %.6g, K2 = %.6g\n", s.model.surface.K1(), s.model.surface.K2());
  std::printf("  solver: %s\n", to_string(s.solver.mode));
  return 0;
}

int cmd_run(const Common& c) {
  RunConfig cfg = load(c);
  validate_config(cfg);
  const EnergyModel& model = cfg.setup.model;
  AuditReport audit;
  auto on_step = [&](int i, const Evolution& ev) {
    const StepSolution& sol = ev.steps[i];
    if (cfg.audit_competitors <= 0) return;
    StepProblem p;
    p.step = i;
    p.t = ev.times[i];
    p.g = ev.g.at(*ev.base, p.t);
    p.prev = i == 0 ? ev.initial.set : ev.cracks[i - 1];
    p.model = model;
    p.base = ev.base;
    p.warm = i == 0 ? ev.initial.params : ev.steps[i - 1].params;
    p.options = cfg.setup.solver;
    AuditReport r = minimality_audit(sol, p, default_sampler(cfg.audit_competitors, cfg.seed + i));
    audit.competitors += r.competitors;
    audit.violations += r.violations;
    if (r.worst > audit.worst || audit.worst_kind.empty()) {
      audit.worst = r.worst;
      audit.worst_kind = r.worst_kind;
    }
  };
  Evolution ev = run_evolution(cfg.setup, nullptr, on_step);
  Ledger ledger = build_ledger(ev, model);
  write_run_artifacts(cfg.output, ev, ledger);

  std::printf("%4s %10s %14s %14s %14s %12s %6s %10s\n", "step", "t", "elastic", "surface", "total", "crack_len",
              "edges", "evals");
  for (std::size_t i = 0; i < ledger.size(); ++i) {
    const LedgerRow& r = ledger[i];
    std::printf("%4zu %10.6g %14.8g %14.8g %14.8g %12.6g %6zu %10ld\n", i, r.t, r.total - r.surface, r.surface,
                r.total, r.crack_length, ev.cracks[i].size(), ev.steps[i].evaluations);
  }
  InequalityReport ineq = check_energy_inequality(ledger);
  bool irrev = check_irreversibility(ev);
  AprioriReport ap = check_apriori(ev, model, cfg.setup.time.T);
  std::printf("energy inequality: %s (worst margin %.3e over %d pairs)\n", ineq.holds ? "holds" : "VIOLATED",
              ineq.worst_margin, ineq.pairs);
  std::printf("irreversibility: %s\n", irrev ? "holds" : "VIOLATED");
  std::printf("a-priori bound: %s (worst ratio %.3e, crack ratio %.3e)\n", ap.holds ? "holds" : "VIOLATED",
              ap.worst_ratio, ap.worst_crack_ratio);
  if (cfg.audit_competitors > 0)
    std::printf("minimality audit: %d competitors, %d violations (worst %.3e, %s)\n", audit.competitors,
                audit.violations, audit.worst, audit.worst_kind.c_str());
  std::printf("artifacts: %s\n", cfg.output.c_str());
  return ineq.holds && irrev && ap.holds && audit.violations == 0 ? 0 : 2;
}

int cmd_study(const Common& c, const std::string& levels_text, const std::string& samples_text) {
  RunConfig cfg = load(c);
  validate_config(cfg);
  std::vector<StudyLevel> levels = cfg.study_levels;
  if (!levels_text.empty()) {
    levels.clear();
    std::stringstream ss(levels_text);
    std::string item;
    while (std::getline(ss, item, ';')) {
      auto v = parse_list(item);
      if (v.size() != 3) throw ConfigError("--levels expects eps,a,delta triples separated by ';'");
      levels.push_back({v[0], v[1], v[2]});
    }
  }
  std::vector<double> samples = samples_text.empty() ? cfg.study_samples : parse_list(samples_text);
  if (levels.empty()) throw ConfigError(cfg.source + ": no study levels given");
  if (samples.empty()) samples = {cfg.setup.time.T};
  StudyReport rep = refinement_study(cfg.setup, levels, samples, cfg.setup.solver.threads);
  std::filesystem::create_directories(cfg.output);
  write_text(cfg.output + "/study.csv", study_csv(rep));
  std::cout << rep.table();
  std::printf("elastic trend: %s\nsurface trend: %s\n", rep.elastic_trend ? "non-increasing" : "FLAGGED",
              rep.surface_trend ? "non-increasing" : "FLAGGED");
  std::printf("artifacts: %s/study.csv\n", cfg.output.c_str());
  return 0;
}

int cmd_oracle_check(const Common& c) {
  RunConfig cfg = load(c);
  validate_config(cfg);
  cfg.setup.solver.mode = SolverMode::Both;
  Evolution ev = run_evolution(cfg.setup);
  double worst = 0;
  int checked = 0, skipped = 0;
  std::printf("%4s %10s %16s %16s %12s\n", "step", "t", "heuristic", "oracle", "gap");
  for (std::size_t i = 0; i < ev.steps.size(); ++i) {
    const StepSolution& s = ev.steps[i];
    if (!s.has_gap) {
      ++skipped;
      std::printf("%4zu %10.6g %16s %16s %12s\n", i, ev.times[i], "-", "-", "cap exceeded");
      continue;
    }
    ++checked;
    worst = std::max(worst, s.gap / (1 + std::fabs(s.oracle_objective)));
    std::printf("%4zu %10.6g %16.10g %16.10g %12.3e\n", i, ev.times[i], s.oracle_objective + s.gap, s.oracle_objective,
                s.gap);
  }
  std::printf("steps checked: %d, skipped: %d, max relative gap: %.3e\n", checked, skipped, worst);
  return worst <= 1e-6 && checked > 0 ? 0 : 2;
}

int cmd_lemma41(const Common& c, const std::vector<std::string>& seg_text, const std::string& eps_text,
                const std::string& a_text) {
  LemmaSpec spec;
  DomainSpec domain;
  SurfaceDensity k;
  std::string out = "out";
  if (!c.config.empty()) {
    RunConfig cfg = load(c);
    spec = cfg.lemma;
    domain = cfg.setup.domain;
    k = cfg.setup.model.surface;
    out = cfg.output;
  } else {
    domain.polygon = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    if (const char* env = std::getenv("FRACSIM_OUT"); env && *env) out = env;
    if (!c.out.empty()) out = c.out;
  }
  for (const auto& t : seg_text) {
    auto v = parse_list(t);
    if (v.size() != 4) throw ConfigError("--segment expects x0,y0,x1,y1");
    spec.segments.push_back({{v[0], v[1]}, {v[2], v[3]}});
  }
  if (!eps_text.empty()) spec.eps = parse_list(eps_text);
  if (!a_text.empty()) spec.a = parse_list(a_text);
  if (spec.segments.empty()) spec.segments = angle_segments({0, 17, 30, 45});
  if (spec.eps.empty()) spec.eps = {1.0 / 64};
  if (spec.a.empty()) spec.a = {0.4, 0.2, 0.1, 0.05};
  std::string csv = lemma_csv(lemma_table(spec, domain, k));
  std::filesystem::create_directories(out);
  write_text(out + "/lemma41.csv", csv);
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasistatic brittle fracture with discontinuous P1 elements on adaptive triangulations"};
  app.require_subcommand(1);
  Common common;

  auto* validate = app.add_subcommand("validate", "check a config without running it");
  add_common(validate, common, false);
  auto* run = app.add_subcommand("run", "run the time-discrete evolution and write artifacts");
  add_common(run, common);
  auto* study = app.add_subcommand("study", "refinement study over (eps, a, delta) levels");
  add_common(study, common);
  std::string levels, samples;
  study->add_option("--levels", levels, "eps,a,delta;eps,a,delta;...");
  study->add_option("--samples", samples, "t1,t2,...");
  auto* oracle = app.add_subcommand("oracle-check", "compare heuristic and exhaustive steps");
  add_common(oracle, common);
  auto* lemma = app.add_subcommand("lemma41", "interpolating-curve energy error table");
  add_common(lemma, common, false);
  std::vector<std::string> segments;
  std::string eps_list, a_list;
  lemma->add_option("--segment", segments, "x0,y0,x1,y1 (repeatable)");
  lemma->add_option("--eps", eps_list, "eps1,eps2,...");
  lemma->add_option("--a", a_list, "a1,a2,...");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*validate) return cmd_validate(common);
    if (*run) return cmd_run(common);
    if (*study) return cmd_study(common, levels, samples);
    if (*oracle) return cmd_oracle_check(common);
    if (*lemma) return cmd_lemma41(common, segments, eps_list, a_list);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
