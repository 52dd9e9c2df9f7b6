#pragma once

#include <string>
#include <vector>

#include "fracture/config.hpp"
#include "fracture/evolution.hpp"

namespace fracture {

// Shortest decimal text that round-trips to the same double.
std::string format_number(double v);

std::string ledger_csv(const Ledger& ledger);
Ledger parse_ledger_csv(const std::string& text);

std::string study_csv(const StudyReport& report);

struct LemmaRow {
  int segment = 0;
  double angle_deg = 0;
  double eps = 0;
  double a = 0;
  double exact_energy = 0;
  double curve_energy = 0;
  double rel_error = 0;
};

// Surface energy of each segment against its interpolating curve on the structured mesh of `domain`.
std::vector<LemmaRow> lemma_table(const LemmaSpec& spec, const DomainSpec& domain, const SurfaceDensity& k);
std::string lemma_csv(const std::vector<LemmaRow>& rows);

// Segments through (1/2, 1/2 + 1/128) at the given angles, ends on the lines x = 1/4 and x = 3/4.
std::vector<Segment> angle_segments(const std::vector<double>& degrees);

// Crack edges chained into polylines, for plotting.
std::string crack_polyline_json(const CrackSet& gamma);

// ledger.csv, crack_step_{i}.json, field_step_{i}.vtk and crack_polyline.json under `dir`.
void write_run_artifacts(const std::string& dir, const Evolution& ev, const Ledger& ledger);

void write_text(const std::string& path, const std::string& text);

}  // namespace fracture
