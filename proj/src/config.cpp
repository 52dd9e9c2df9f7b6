#include "fracture/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <yaml-cpp/yaml.h>

namespace fracture {

namespace {

struct Layer {
  YAML::Node root;
  std::string name;
};

[[noreturn]] void fail(const Layer& layer, const YAML::Mark& mark, const std::string& what) {
  int line = mark.line >= 0 ? mark.line + 1 : -1;
  int col = mark.column >= 0 ? mark.column + 1 : -1;
  std::ostringstream os;
  os << layer.name;
  if (line > 0) os << ':' << line << ':' << col;
  os << ": " << what;
  throw ConfigError(os.str(), line, col);
}

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"", {"preset", "domain", "model", "loading", "initial_crack", "discretization", "solver", "study", "lemma41",
            "audit", "output", "seed"}},
      {"domain", {"polygon", "brittle", "boundary", "exterior_collar"}},
      {"domain.boundary[]", {"from", "to", "label"}},
      {"model", {"bulk", "body", "traction", "surface", "degenerate_ok", "quadrature"}},
      {"model.bulk", {"kind", "mu", "p"}},
      {"model.body", {"kappa", "q", "f"}},
      {"model.traction", {"l"}},
      {"model.surface", {"kind", "kappa_s", "M"}},
      {"loading", {"g"}},
      {"discretization", {"eps", "a", "delta", "T", "grid", "band"}},
      {"solver", {"mode", "cap", "grid_points", "full_grid", "newton_tol", "newton_max_iter", "threads", "max_moves"}},
      {"study", {"levels", "samples"}},
      {"lemma41", {"segments", "eps", "a"}},
      {"audit", {"competitors"}},
  };
  return s;
}

void check_keys(const Layer& layer, const YAML::Node& node, const std::string& path) {
  auto it = schema().find(path);
  if (it == schema().end()) return;
  if (!node.IsMap()) fail(layer, node.Mark(), "'" + (path.empty() ? std::string("config") : path) + "' must be a table");
  for (const auto& kv : node) {
    std::string key = kv.first.as<std::string>();
    if (!it->second.count(key))
      fail(layer, kv.first.Mark(), "unknown key '" + key + "'" + (path.empty() ? "" : " in '" + path + "'"));
    std::string child = path.empty() ? key : path + "." + key;
    if (kv.second.IsSequence() && schema().count(child + "[]")) {
      for (const auto& item : kv.second) check_keys(layer, item, child + "[]");
    } else if (schema().count(child)) {
      check_keys(layer, kv.second, child);
    }
  }
}

class Reader {
 public:
  Reader(Layer user, Layer preset) : user_(std::move(user)), preset_(std::move(preset)) {}

  // Node at a dotted path, from the user layer first, then the preset.
  bool find(const std::string& path, YAML::Node* out, const Layer** layer) const {
    for (const Layer* l : {&user_, &preset_}) {
      if (!l->root) continue;
      YAML::Node n = walk(l->root, path);
      if (n) {
        out->reset(n);
        *layer = l;
        return true;
      }
    }
    return false;
  }

  bool has(const std::string& path) const {
    YAML::Node n;
    const Layer* l;
    return find(path, &n, &l);
  }

  const Layer& user() const { return user_; }

 private:
  static YAML::Node walk(YAML::Node node, const std::string& path) {
    std::stringstream ss(path);
    std::string key;
    while (std::getline(ss, key, '.')) {
      if (!node.IsMap()) return YAML::Node(YAML::NodeType::Undefined);
      YAML::Node next = node[key];
      if (!next) return YAML::Node(YAML::NodeType::Undefined);
      node.reset(next);
    }
    return node;
  }

  Layer user_;
  Layer preset_;
};

double number(const Layer& l, const YAML::Node& n, const std::string& what) {
  if (!n.IsScalar()) fail(l, n.Mark(), what + " must be a number");
  std::string text = n.Scalar();
  try {
    std::size_t pos = 0;
    double v = std::stod(text, &pos);
    if (pos == text.size()) return v;
  } catch (const std::exception&) {
  }
  try {
    Expr e = Expr::parse(text);
    if (!e.is_constant()) fail(l, n.Mark(), what + " must be a constant, got '" + text + "'");
    return e.eval(0, 0, 0);
  } catch (const FormulaError& err) {
    fail(l, n.Mark(), what + ": " + err.what());
  }
}

Vec2 point(const Layer& l, const YAML::Node& n, const std::string& what) {
  if (!n.IsSequence() || n.size() != 2) fail(l, n.Mark(), what + " must be a pair [x, y]");
  return {number(l, n[0], what), number(l, n[1], what)};
}

Expr formula(const Layer& l, const YAML::Node& n, const std::string& what) {
  if (!n.IsScalar()) fail(l, n.Mark(), what + " must be a formula string");
  try {
    return Expr::parse(n.Scalar());
  } catch (const FormulaError& err) {
    fail(l, n.Mark(), what + ": " + err.what());
  }
}

VectorFormula vector_formula(const Layer& l, const YAML::Node& n, const std::string& what) {
  if (!n.IsSequence() || n.size() != 2) fail(l, n.Mark(), what + " must be a pair of formulas");
  return {formula(l, n[0], what), formula(l, n[1], what)};
}

std::vector<double> numbers(const Layer& l, const YAML::Node& n, const std::string& what) {
  if (!n.IsSequence()) fail(l, n.Mark(), what + " must be a list of numbers");
  std::vector<double> out;
  for (const auto& x : n) out.push_back(number(l, x, what));
  return out;
}

Rect rect(const Layer& l, const YAML::Node& n, const std::string& what) {
  auto v = numbers(l, n, what);
  if (v.size() != 4) fail(l, n.Mark(), what + " must be [x0, y0, x1, y1]");
  if (!(v[0] < v[2] && v[1] < v[3])) fail(l, n.Mark(), what + " must satisfy x0 < x1 and y0 < y1");
  return {v[0], v[1], v[2], v[3]};
}

Segment segment(const Layer& l, const YAML::Node& n, const std::string& what) {
  if (!n.IsSequence() || n.size() != 2) fail(l, n.Mark(), what + " must be [[x0, y0], [x1, y1]]");
  Segment s{point(l, n[0], what), point(l, n[1], what)};
  if (s.length() == 0) fail(l, n.Mark(), what + " has zero length");
  return s;
}

template <class T>
T scalar_as(const Layer& l, const YAML::Node& n, const std::string& what) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    fail(l, n.Mark(), what + " has the wrong type");
  }
}

YAML::Node parse_yaml(const std::string& text, const std::string& name) {
  try {
    return YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    Layer l{YAML::Node(), name};
    fail(l, e.mark, e.msg);
  }
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source) {
  Layer user{parse_yaml(text, source), source};
  if (!user.root || user.root.IsNull()) user.root = YAML::Node(YAML::NodeType::Map);
  check_keys(user, user.root, "");

  RunConfig cfg;
  cfg.source = source;
  Layer preset{YAML::Node(), ""};
  if (user.root["preset"]) {
    cfg.preset = scalar_as<std::string>(user, user.root["preset"], "preset");
    auto it = presets().find(cfg.preset);
    if (it == presets().end()) {
      std::string names;
      for (const auto& [k, v] : presets()) names += (names.empty() ? "" : ", ") + k;
      fail(user, user.root["preset"].Mark(), "unknown preset '" + cfg.preset + "' (available: " + names + ")");
    }
    preset = {parse_yaml(it->second, "preset:" + cfg.preset), "preset:" + cfg.preset};
    check_keys(preset, preset.root, "");
  }
  Reader r(user, preset);

  YAML::Node n;
  const Layer* l = nullptr;
  auto get = [&](const std::string& path) {
    bool ok = r.find(path, &n, &l);
    if (ok) cfg.marks[path] = {n.Mark().line + 1, n.Mark().column + 1};
    return ok;
  };
  auto require = [&](const std::string& path) {
    if (!get(path)) {
      Layer u = r.user();
      fail(u, u.root.Mark(), "missing required key '" + path + "'");
    }
  };

  EvolutionSetup& s = cfg.setup;
  // Domain.
  require("domain.polygon");
  if (!n.IsSequence() || n.size() < 3) fail(*l, n.Mark(), "domain.polygon must list at least three vertices");
  for (const auto& p : n) s.domain.polygon.push_back(point(*l, p, "domain.polygon vertex"));
  get("domain");
  if (get("domain.brittle")) {
    if (!n.IsSequence()) fail(*l, n.Mark(), "domain.brittle must be a list of rectangles");
    for (const auto& b : n) s.domain.brittle.push_back(rect(*l, b, "domain.brittle rectangle"));
  }
  if (get("domain.boundary")) {
    if (!n.IsSequence()) fail(*l, n.Mark(), "domain.boundary must be a list");
    for (const auto& b : n) {
      if (!b["from"] || !b["to"] || !b["label"]) fail(*l, b.Mark(), "boundary entries need from, to and label");
      LabelSegment seg;
      seg.a = point(*l, b["from"], "boundary.from");
      seg.b = point(*l, b["to"], "boundary.to");
      std::string label = scalar_as<std::string>(*l, b["label"], "boundary.label");
      if (label == "dirichlet") seg.label = BoundaryLabel::Dirichlet;
      else if (label == "neumann") seg.label = BoundaryLabel::Neumann;
      else if (label == "traction") seg.label = BoundaryLabel::Traction;
      else fail(*l, b["label"].Mark(), "unknown boundary label '" + label + "' (dirichlet, neumann, traction)");
      s.domain.boundary.push_back(seg);
    }
  }
  if (get("domain.exterior_collar")) s.domain.exterior_collar = scalar_as<bool>(*l, n, "domain.exterior_collar");

  // Model.
  get("model");
  EnergyModel& m = s.model;
  if (get("model.bulk.kind")) {
    std::string kind = scalar_as<std::string>(*l, n, "model.bulk.kind");
    if (kind == "quadratic") m.bulk.variant = BulkVariant::Quadratic;
    else if (kind == "pnorm") m.bulk.variant = BulkVariant::PNorm;
    else fail(*l, n.Mark(), "unknown bulk kind '" + kind + "' (quadratic, pnorm)");
  }
  if (get("model.bulk.mu")) m.bulk.mu = number(*l, n, "model.bulk.mu");
  if (get("model.bulk.p")) m.bulk.p = number(*l, n, "model.bulk.p");
  if (m.bulk.mu <= 0) fail(*l, n.Mark(), "model.bulk.mu must be positive");
  if (m.bulk.p <= 1) fail(*l, n.Mark(), "model.bulk.p must exceed 1");
  if (get("model.body.kappa")) {
    m.body.kappa = number(*l, n, "model.body.kappa");
    if (m.body.kappa < 0) fail(*l, n.Mark(), "model.body.kappa must be non-negative");
  }
  if (get("model.body.q")) {
    m.body.q = number(*l, n, "model.body.q");
    if (m.body.q <= 1) fail(*l, n.Mark(), "model.body.q must exceed 1");
  }
  if (get("model.body.f")) m.body.set_load(vector_formula(*l, n, "model.body.f"));
  if (get("model.traction.l")) m.traction.set_load(vector_formula(*l, n, "model.traction.l"));
  if (get("model.surface.kind")) {
    std::string kind = scalar_as<std::string>(*l, n, "model.surface.kind");
    if (kind == "isotropic") m.surface.variant = SurfaceVariant::Isotropic;
    else if (kind == "anisotropic") m.surface.variant = SurfaceVariant::AnisotropicEllipse;
    else fail(*l, n.Mark(), "unknown surface kind '" + kind + "' (isotropic, anisotropic)");
  }
  if (get("model.surface.kappa_s")) {
    m.surface.kappa_s = number(*l, n, "model.surface.kappa_s");
    if (m.surface.kappa_s <= 0) fail(*l, n.Mark(), "model.surface.kappa_s must be positive");
  }
  if (get("model.surface.M")) {
    if (!n.IsSequence() || n.size() != 2) fail(*l, n.Mark(), "model.surface.M must be a 2x2 matrix");
    for (int i = 0; i < 2; ++i) {
      auto row = numbers(*l, n[i], "model.surface.M row");
      if (row.size() != 2) fail(*l, n[i].Mark(), "model.surface.M rows need two entries");
      m.surface.M(i, 0) = row[0];
      m.surface.M(i, 1) = row[1];
    }
    Eigen::SelfAdjointEigenSolver<Mat2> es(m.surface.M);
    if ((m.surface.M - m.surface.M.transpose()).norm() > 0 || es.eigenvalues()(0) <= 0)
      fail(*l, n.Mark(), "model.surface.M must be symmetric positive definite");
  }
  if (get("model.degenerate_ok")) m.degenerate_ok = scalar_as<bool>(*l, n, "model.degenerate_ok");
  if (get("model.quadrature")) {
    m.quadrature = scalar_as<int>(*l, n, "model.quadrature");
    if (m.quadrature != 1 && m.quadrature != 3 && m.quadrature != 6 && m.quadrature != 7)
      fail(*l, n.Mark(), "model.quadrature must be 1, 3, 6 or 7");
  }

  // Loading and initial crack.
  require("loading.g");
  s.g = vector_formula(*l, n, "loading.g");
  if (get("initial_crack")) {
    if (!n.IsSequence()) fail(*l, n.Mark(), "initial_crack must be a list of segments");
    for (const auto& seg : n) s.initial_crack.push_back(segment(*l, seg, "initial_crack segment"));
  }

  // Discretization.
  require("discretization.eps");
  s.eps = number(*l, n, "discretization.eps");
  if (!(s.eps > 0)) fail(*l, n.Mark(), "discretization.eps must be positive");
  require("discretization.a");
  s.a = number(*l, n, "discretization.a");
  if (!(s.a > 0 && s.a <= 0.5)) fail(*l, n.Mark(), "discretization.a must lie in (0, 1/2]");
  require("discretization.delta");
  double delta = number(*l, n, "discretization.delta");
  if (!(delta > 0)) fail(*l, n.Mark(), "discretization.delta must be positive");
  require("discretization.T");
  double T = number(*l, n, "discretization.T");
  if (!(T > 0)) fail(*l, n.Mark(), "discretization.T must be positive");
  s.time = TimeGrid::make(delta, T);
  if (get("discretization.grid")) {
    s.solver.knot_values = numbers(*l, n, "discretization.grid");
    if (s.solver.knot_values.empty() || s.solver.knot_values.size() > 7)
      fail(*l, n.Mark(), "discretization.grid must list between 1 and 7 knot values");
    for (double v : s.solver.knot_values)
      if (v < s.a || v > 1 - s.a) {
        std::ostringstream os;
        os << "knot grid value " << v << " lies outside [a, 1 - a] = [" << s.a << ", " << 1 - s.a << "]";
        fail(*l, n.Mark(), os.str());
      }
  }
  if (get("discretization.band")) {
    if (!n.IsSequence()) fail(*l, n.Mark(), "discretization.band must be a list of rectangles");
    for (const auto& b : n) s.solver.band.push_back(rect(*l, b, "discretization.band rectangle"));
  }

  // Solver.
  get("solver");
  if (get("solver.mode")) {
    try {
      s.solver.mode = parse_solver_mode(scalar_as<std::string>(*l, n, "solver.mode"));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      fail(*l, n.Mark(), e.what());
    }
  }
  if (get("solver.cap")) s.solver.cap = scalar_as<int>(*l, n, "solver.cap");
  if (get("solver.grid_points")) {
    s.solver.grid_points = scalar_as<int>(*l, n, "solver.grid_points");
    if (s.solver.grid_points < 1 || s.solver.grid_points > 7)
      fail(*l, n.Mark(), "solver.grid_points must lie in 1..7");
  }
  if (get("solver.full_grid")) s.solver.full_grid = scalar_as<bool>(*l, n, "solver.full_grid");
  if (get("solver.newton_tol")) s.solver.newton_tol = number(*l, n, "solver.newton_tol");
  if (get("solver.newton_max_iter")) s.solver.newton_max_iter = scalar_as<int>(*l, n, "solver.newton_max_iter");
  if (get("solver.threads")) s.solver.threads = std::max(1, scalar_as<int>(*l, n, "solver.threads"));
  if (get("solver.max_moves")) s.solver.max_moves = scalar_as<int>(*l, n, "solver.max_moves");

  // Study, lemma and audit blocks.
  if (get("study.levels")) {
    if (!n.IsSequence()) fail(*l, n.Mark(), "study.levels must be a list of [eps, a, delta]");
    for (const auto& lv : n) {
      auto v = numbers(*l, lv, "study level");
      if (v.size() != 3) fail(*l, lv.Mark(), "study levels are [eps, a, delta]");
      if (!(v[0] > 0 && v[1] > 0 && v[1] <= 0.5 && v[2] > 0)) fail(*l, lv.Mark(), "study level out of range");
      cfg.study_levels.push_back({v[0], v[1], v[2]});
    }
    for (std::size_t i = 1; i < cfg.study_levels.size(); ++i) {
      const auto &p = cfg.study_levels[i - 1], &q = cfg.study_levels[i];
      if (!(q.eps < p.eps && q.a <= p.a && q.delta <= p.delta))
        fail(*l, n.Mark(), "study levels must be decreasing in eps and non-increasing in a and delta");
    }
  }
  if (get("study.samples")) {
    cfg.study_samples = numbers(*l, n, "study.samples");
    for (double t : cfg.study_samples)
      if (t < 0 || t > T) fail(*l, n.Mark(), "study samples must lie in [0, T]");
  }
  if (get("lemma41.segments")) {
    if (!n.IsSequence()) fail(*l, n.Mark(), "lemma41.segments must be a list of segments");
    for (const auto& seg : n) cfg.lemma.segments.push_back(segment(*l, seg, "lemma41 segment"));
  }
  if (get("lemma41.eps")) cfg.lemma.eps = numbers(*l, n, "lemma41.eps");
  if (get("lemma41.a")) {
    cfg.lemma.a = numbers(*l, n, "lemma41.a");
    for (double a : cfg.lemma.a)
      if (!(a > 0 && a <= 0.5)) fail(*l, n.Mark(), "lemma41.a values must lie in (0, 1/2]");
  }
  if (get("audit.competitors")) cfg.audit_competitors = scalar_as<int>(*l, n, "audit.competitors");
  if (get("output")) cfg.output = scalar_as<std::string>(*l, n, "output");
  if (get("seed")) cfg.seed = scalar_as<std::uint64_t>(*l, n, "seed");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

RunConfig preset_config(const std::string& name) { return parse_config("preset: " + name + "\n", "preset:" + name); }

namespace {

[[noreturn]] void anchored(const RunConfig& cfg, const std::string& path, const std::string& what) {
  auto it = cfg.marks.find(path);
  std::ostringstream os;
  os << cfg.source;
  int line = -1, col = -1;
  if (it != cfg.marks.end()) {
    line = it->second.first;
    col = it->second.second;
    os << ':' << line << ':' << col;
  }
  os << ": " << what;
  throw ConfigError(os.str(), line, col);
}

}  // namespace

void validate_config(const RunConfig& cfg) {
  const EvolutionSetup& s = cfg.setup;
  std::shared_ptr<const RegularTriangulation> mesh;
  try {
    mesh = std::make_shared<const RegularTriangulation>(build_structured_mesh(s.domain, s.eps));
  } catch (const DomainError& e) {
    anchored(cfg, cfg.marks.count("domain.boundary") ? "domain.boundary" : "domain", e.what());
  } catch (const NonConformingDomain& e) {
    anchored(cfg, "domain.polygon", e.what());
  }
  try {
    coercivity_constants(s.model, *mesh, s.time.T);
  } catch (const DegenerateModel& e) {
    anchored(cfg, "model", e.what());
  }
  try {
    for (double t : {0.0, s.time.T}) nodal_interpolant(s.g, *mesh, t);
  } catch (const FormulaError& e) {
    anchored(cfg, "loading.g", e.what());
  }
  if (!s.initial_crack.empty()) {
    try {
      approximate_initial_crack(s.initial_crack, mesh, s.a);
    } catch (const Error& e) {
      anchored(cfg, "initial_crack", e.what());
    }
  }
  for (const auto& lv : cfg.study_levels) {
    try {
      build_structured_mesh(s.domain, lv.eps);
    } catch (const Error& e) {
      anchored(cfg, "study.levels", "level eps = " + std::to_string(lv.eps) + ": " + e.what());
    }
  }
}

}  // namespace fracture
