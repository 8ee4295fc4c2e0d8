#pragma once

#include "edgebench/scan/scan.hpp"

namespace edgebench::scan {

struct DetectConfig {
  double cell = 0.5;
  std::size_t min_cluster_size = 10;
  /// Points below this height (sensor frame) are treated as ground.
  double z_min = -1.5;
  double max_range = 40.0;
  /// Lower bound on the duration of detect(), emulating inference compute.
  double fixed_compute_delay_ms = 0.0;
};

/// Grid clustering only: XY cells, 4-connected components, small clusters dropped.
ObjectList cluster(const ExpandedCloud& cloud, const DetectConfig& cfg);

/// cluster(), then busy-waits until fixed_compute_delay_ms have passed since the call began.
ObjectList detect(const ExpandedCloud& cloud, const DetectConfig& cfg);

}  // namespace edgebench::scan
