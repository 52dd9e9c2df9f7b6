#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fracture/output.hpp"
#include "helpers.hpp"

using namespace testing;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("fracsim_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Result fracsim(const std::string& args, const fs::path& dir, const std::string& env = "") {
  const char* bin = std::getenv("FRACSIM");
  REQUIRE_MESSAGE(bin != nullptr, "FRACSIM must point at the fracsim binary");
  fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  std::string cmd = "cd '" + dir.string() + "' && " + env + " '" + bin + "' " + args + " > '" + out.string() + "' 2> '" +
                    err.string() + "'";
  int status = std::system(cmd.c_str());
  int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return {code, slurp(out), slurp(err)};
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("validate accepts every shipped preset") {
  fs::path dir = scratch("presets");
  for (const auto& [name, text] : presets()) {
    Result r = fracsim("validate --config preset:" + name, dir);
    CHECK_MESSAGE(r.code == 0, name << ": " << r.err);
    CHECK(r.out.find("ok: preset:" + name) != std::string::npos);
  }
}

TEST_CASE("validate rejects traction touching the brittle region") {
  fs::path dir = scratch("traction");
  write_file(dir / "cfg.yaml",
             "preset: strip-1d\n"
             "domain:\n"
             "  boundary:\n"
             "    - {from: [0.75, 0], to: [0.75, 0.25], label: dirichlet}\n"
             "    - {from: [0.25, 0], to: [0.5, 0], label: traction}\n");
  Result r = fracsim("validate --config cfg.yaml", dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("closure(Ω_B)∩∂_S Ω = ∅") != std::string::npos);
  CHECK(r.err.find("cfg.yaml:4:") != std::string::npos);
}

TEST_CASE("validate rejects knot grid values outside [a, 1 - a]") {
  fs::path dir = scratch("grid");
  write_file(dir / "cfg.yaml", "preset: strip-1d\ndiscretization:\n  a: 0.1\n  grid: [0.05, 0.5]\n");
  Result r = fracsim("validate --config cfg.yaml", dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("cfg.yaml:4:") != std::string::npos);
  CHECK(r.err.find("0.05") != std::string::npos);
}

TEST_CASE("validate rejects unknown keys and bad YAML") {
  fs::path dir = scratch("schema");
  write_file(dir / "a.yaml", "preset: strip-1d\nsolver:\n  mode: oracle\n  turbo: true\n");
  Result a = fracsim("validate --config a.yaml", dir);
  CHECK(a.code == 1);
  CHECK(a.err.find("turbo") != std::string::npos);
  CHECK(a.err.find("a.yaml:4:") != std::string::npos);
  write_file(dir / "b.yaml", "domain: [1, 2\n");
  CHECK(fracsim("validate --config b.yaml", dir).code == 1);
  CHECK(fracsim("validate --config preset:nope", dir).code == 1);
}

TEST_CASE("run writes artifacts and reruns are byte-identical") {
  fs::path dir = scratch("run");
  Result r1 = fracsim("run --config preset:strip-1d --out first", dir);
  REQUIRE_MESSAGE(r1.code == 0, r1.err);
  Result r2 = fracsim("run --config preset:strip-1d --out second", dir);
  REQUIRE(r2.code == 0);
  for (const char* f : {"ledger.csv", "crack_polyline.json", "crack_step_15.json", "field_step_15.vtk"}) {
    CHECK_MESSAGE(fs::exists(dir / "first" / f), f);
    CHECK(slurp(dir / "first" / f) == slurp(dir / "second" / f));
  }
  auto body = [](const std::string& s) { return s.substr(0, s.rfind("artifacts:")); };
  CHECK(body(r1.out) == body(r2.out));

  // The ledger re-parses to the in-process values.
  Ledger file = parse_ledger_csv(slurp(dir / "first" / "ledger.csv"));
  EvolutionSetup s = preset_config("strip-1d").setup;
  Evolution ev = run_evolution(s);
  Ledger mem = build_ledger(ev, s.model);
  REQUIRE(file.size() == mem.size());
  for (std::size_t i = 0; i < mem.size(); ++i) {
    CHECK(std::fabs(file[i].t - mem[i].t) <= 1e-12);
    CHECK(std::fabs(file[i].total - mem[i].total) <= 1e-12);
    CHECK(std::fabs(file[i].W_work - mem[i].W_work) <= 1e-12);
    CHECK(std::fabs(file[i].e_term - mem[i].e_term) <= 1e-12);
    CHECK(std::fabs(file[i].crack_length - mem[i].crack_length) <= 1e-12);
  }
}

TEST_CASE("output directory precedence") {
  fs::path dir = scratch("outdir");
  CHECK(fracsim("run --config preset:strip-1d", dir, "FRACSIM_OUT=envout").code == 0);
  CHECK(fs::exists(dir / "envout" / "ledger.csv"));
  CHECK(fracsim("run --config preset:strip-1d --out flag", dir, "FRACSIM_OUT=envout2").code == 0);
  CHECK(fs::exists(dir / "flag" / "ledger.csv"));
  CHECK_FALSE(fs::exists(dir / "envout2"));
}

TEST_CASE("study writes one row per level and sample") {
  fs::path dir = scratch("study");
  Result r = fracsim(
      "study --config preset:strip-1d --solver heuristic --levels '0.25,0.25,0.1;0.125,0.25,0.1;0.0625,0.25,0.05' "
      "--samples 0.5,1.0,1.5 --out s",
      dir);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  std::istringstream csv(slurp(dir / "s" / "study.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 9);
}

TEST_CASE("lemma41 reproduces axis-aligned segments exactly") {
  fs::path dir = scratch("lemma");
  Result r = fracsim("lemma41 --segment 0.25,0.5078125,0.75,0.5078125 --eps 0.0625 --a 0.4,0.1 --out l", dir);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  std::istringstream csv(slurp(dir / "l" / "lemma41.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "segment,angle_deg,eps,a,exact_energy,curve_energy,rel_error");
  int rows = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    ++rows;
    CHECK(line.substr(line.rfind(',') + 1) == "0");
  }
  CHECK(rows == 2);
}

TEST_CASE("oracle-check on the small strip") {
  fs::path dir = scratch("oracle");
  Result r = fracsim("oracle-check --config preset:strip-1d", dir);
  CHECK_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("gap") != std::string::npos);
}

TEST_CASE("bad arguments exit non-zero") {
  fs::path dir = scratch("args");
  CHECK(fracsim("run --config preset:strip-1d --solver magic", dir).code != 0);
  CHECK(fracsim("frobnicate", dir).code != 0);
}
