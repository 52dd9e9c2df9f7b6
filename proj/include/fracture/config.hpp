#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fracture/errors.hpp"
#include "fracture/evolution.hpp"

namespace fracture {

struct LemmaSpec {
  std::vector<Segment> segments;
  std::vector<double> eps;
  std::vector<double> a;
};

struct RunConfig {
  std::string source;  // file name used in diagnostics
  std::string preset;
  EvolutionSetup setup;
  std::vector<StudyLevel> study_levels;
  std::vector<double> study_samples;
  LemmaSpec lemma;
  int audit_competitors = 0;
  std::string output = "out";
  std::uint64_t seed = 1;
  // Source positions (line, column; 1-based) of config blocks, keyed by dotted path.
  std::map<std::string, std::pair<int, int>> marks;
};

// Shipped scenario presets: name -> YAML text.
const std::map<std::string, std::string>& presets();

// Parses a config; keys absent from the file fall back to the named preset.
// Throws ConfigError with a line-anchored message on schema or value errors.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);
RunConfig preset_config(const std::string& name);

// Domain conformity, model constants, initial crack and knot grid checks, anchored to config lines.
void validate_config(const RunConfig& cfg);

}  // namespace fracture
