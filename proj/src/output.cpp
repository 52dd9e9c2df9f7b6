#include "fracture/output.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "fracture/crack.hpp"

namespace fracture {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

const char* const kLedgerColumns[] = {"t",      "bulk",    "body",   "traction", "surface",
                                      "total",  "W_work",  "Fdot",   "F_work",   "Gdot",
                                      "G_work", "e_term",  "crack_length"};

std::array<double*, 13> ledger_fields(LedgerRow& r) {
  return {&r.t,      &r.bulk,   &r.body, &r.traction, &r.surface, &r.total,       &r.W_work,
          &r.Fdot,   &r.F_work, &r.Gdot, &r.G_work,   &r.e_term,  &r.crack_length};
}

double parse_number(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw Error("malformed number '" + s + "'");
  return v;
}

}  // namespace

std::string ledger_csv(const Ledger& ledger) {
  std::ostringstream os;
  for (std::size_t c = 0; c < 13; ++c) os << (c ? "," : "") << kLedgerColumns[c];
  os << '\n';
  for (LedgerRow r : ledger) {
    auto f = ledger_fields(r);
    for (std::size_t c = 0; c < f.size(); ++c) os << (c ? "," : "") << format_number(*f[c]);
    os << '\n';
  }
  return os.str();
}

Ledger parse_ledger_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("empty ledger");
  std::string expected;
  for (std::size_t c = 0; c < 13; ++c) expected += std::string(c ? "," : "") + kLedgerColumns[c];
  if (line != expected) throw Error("unexpected ledger header");
  Ledger out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LedgerRow r;
    auto f = ledger_fields(r);
    std::istringstream ls(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ls, cell, ',')) {
      if (c >= f.size()) throw Error("too many ledger columns");
      *f[c++] = parse_number(cell);
    }
    if (c != f.size()) throw Error("too few ledger columns");
    out.push_back(r);
  }
  return out;
}

std::string study_csv(const StudyReport& report) {
  std::ostringstream os;
  os << "eps,a,delta,t,elastic,surface,total,crack_length,initial_surface,d_elastic,d_surface,d_total,d_gradient\n";
  for (const auto& r : report.rows) {
    const double v[] = {r.eps,          r.a,           r.delta,           r.t,         r.elastic,
                        r.surface,      r.total,       r.crack_length,    r.initial_surface,
                        r.d_elastic,    r.d_surface,   r.d_total,         r.d_gradient};
    for (std::size_t c = 0; c < std::size(v); ++c) os << (c ? "," : "") << format_number(v[c]);
    os << '\n';
  }
  return os.str();
}

std::vector<LemmaRow> lemma_table(const LemmaSpec& spec, const DomainSpec& domain, const SurfaceDensity& k) {
  std::vector<LemmaRow> rows;
  for (double eps : spec.eps) {
    RegularTriangulation tri = build_structured_mesh(domain, eps);
    for (double a : spec.a) {
      for (std::size_t i = 0; i < spec.segments.size(); ++i) {
        const Segment& s = spec.segments[i];
        LemmaRow r;
        r.segment = static_cast<int>(i);
        Vec2 d = s.p1 - s.p0;
        r.angle_deg = std::atan2(d.y, d.x) * 180.0 / M_PI;
        r.eps = eps;
        r.a = a;
        r.exact_energy = k.cost(s.p0, s.p1);
        InterpolatingCurve c = interpolating_curve(s, tri, a);
        for (const auto& piece : c.polyline) r.curve_energy += k.cost(piece.p0, piece.p1);
        r.rel_error = std::fabs(r.curve_energy - r.exact_energy) / r.exact_energy;
        rows.push_back(r);
      }
    }
  }
  return rows;
}

std::string lemma_csv(const std::vector<LemmaRow>& rows) {
  std::ostringstream os;
  os << "segment,angle_deg,eps,a,exact_energy,curve_energy,rel_error\n";
  for (const auto& r : rows)
    os << r.segment << ',' << format_number(r.angle_deg) << ',' << format_number(r.eps) << ','
       << format_number(r.a) << ',' << format_number(r.exact_energy) << ',' << format_number(r.curve_energy) << ','
       << format_number(r.rel_error) << '\n';
  return os.str();
}

std::vector<Segment> angle_segments(const std::vector<double>& degrees) {
  const Vec2 c{0.5, 0.5 + 1.0 / 128};
  std::vector<Segment> out;
  for (double deg : degrees) {
    double slope = std::tan(deg * M_PI / 180.0);
    out.push_back({c + Vec2{-0.25, -0.25 * slope}, c + Vec2{0.25, 0.25 * slope}});
  }
  return out;
}

std::string crack_polyline_json(const CrackSet& gamma) {
  // Endpoints snapped to a fine lattice so pieces from different steps chain.
  auto key = [](const Vec2& p) {
    return std::make_pair(std::llround(p.x * 1e10), std::llround(p.y * 1e10));
  };
  std::vector<Segment> segs;
  for (const auto& [k, e] : gamma.edges()) segs.push_back({e.p0, e.p1});
  std::map<std::pair<long long, long long>, std::vector<int>> at;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    at[key(segs[i].p0)].push_back(static_cast<int>(i));
    at[key(segs[i].p1)].push_back(static_cast<int>(i));
  }
  std::vector<char> used(segs.size(), 0);
  auto walk = [&](int start, Vec2 from) {
    std::vector<Vec2> line{from};
    int cur = start;
    while (cur >= 0) {
      used[cur] = 1;
      Vec2 next = key(segs[cur].p0) == key(from) ? segs[cur].p1 : segs[cur].p0;
      line.push_back(next);
      from = next;
      cur = -1;
      for (int j : at[key(from)])
        if (!used[j]) {
          cur = j;
          break;
        }
    }
    return line;
  };
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  auto emit = [&](const std::vector<Vec2>& line) {
    nlohmann::ordered_json pl = nlohmann::ordered_json::array();
    for (const auto& p : line) pl.push_back({p.x, p.y});
    j.push_back(pl);
  };
  // Chains start at odd-degree endpoints, then the remaining closed loops.
  for (const auto& [pt, ids] : at) {
    int live = 0;
    for (int i : ids) live += !used[i];
    if (live % 2 == 1) {
      for (int i : ids)
        if (!used[i]) {
          Vec2 from = key(segs[i].p0) == pt ? segs[i].p0 : segs[i].p1;
          emit(walk(i, from));
          break;
        }
    }
  }
  for (std::size_t i = 0; i < segs.size(); ++i)
    if (!used[i]) emit(walk(static_cast<int>(i), segs[i].p0));
  return nlohmann::ordered_json{{"polylines", j}}.dump(1);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed: " + path);
}

void write_run_artifacts(const std::string& dir, const Evolution& ev, const Ledger& ledger) {
  std::filesystem::create_directories(dir);
  write_text(dir + "/ledger.csv", ledger_csv(ledger));
  for (std::size_t i = 0; i < ev.steps.size(); ++i) {
    write_text(dir + "/crack_step_" + std::to_string(i) + ".json", crack_json(ev.cracks[i]));
    std::ostringstream vtk;
    write_field_vtk(vtk, ev.steps[i].u);
    write_text(dir + "/field_step_" + std::to_string(i) + ".vtk", vtk.str());
  }
  if (!ev.cracks.empty()) write_text(dir + "/crack_polyline.json", crack_polyline_json(ev.cracks.back()));
}

}  // namespace fracture
