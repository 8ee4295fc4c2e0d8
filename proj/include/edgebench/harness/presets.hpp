#pragma once

#include <string>
#include <vector>

#include "edgebench/harness/scenario.hpp"

namespace edgebench::harness {

struct PresetRun {
  std::string label;
  ScenarioConfig config;
};

struct Preset {
  std::string name;
  std::string description;
  std::vector<PresetRun> runs;
  /// Non-empty for throughput sweeps: each run is swept over these rates.
  std::vector<double> sweep_rates;
  std::size_t sweep_windows = 10;
};

const std::vector<std::string>& preset_names();

/// Throws ValidationError for an unknown name.
Preset make_preset(const std::string& name);

/// Applies `key=value` to every run. Throws ParseError for malformed input
/// and ValidationError if a run becomes invalid.
void apply_override(Preset& p, const std::string& assignment);

/// Replaces every seed (scan, downsampling, shaper) with `seed`.
void apply_seed(Preset& p, std::uint64_t seed);

/// Keys accepted by apply_override, for usage text.
const std::vector<std::string>& override_keys();

}  // namespace edgebench::harness
