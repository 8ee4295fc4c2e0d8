#pragma once

#include <optional>
#include <vector>

#include "edgebench/harness/scenario.hpp"
#include "json.hpp"

namespace edgebench::harness {

struct SweepPoint {
  double rate_hz = 0;
  std::size_t published = 0;
  std::size_t completed = 0;
  double mean_ms = 0;
  double p95_ms = 0;
  /// Published minus completed at each window boundary.
  std::vector<long> backlog;
  bool saturated = false;
};

struct SweepReport {
  std::vector<SweepPoint> points;
  std::optional<double> saturation_hz;
  /// Mean latency against rate over the points below saturation (>= 3 needed).
  std::optional<SlopeTest> below_saturation;
};

/// True when the backlog strictly increases over at least 80% of the
/// consecutive window pairs.
bool backlog_saturated(const std::vector<long>& backlog);

/// Runs `base` at each rate for `window_count` windows of `window`. The
/// detector is forced to loop-through.
SweepReport sweep_throughput(ScenarioConfig base, const std::vector<double>& rates, std::size_t window_count = 10,
                             Nanos window = kSeconds);

nlohmann::json sweep_json(const ScenarioConfig& base, const SweepReport& r);

}  // namespace edgebench::harness
