#pragma once

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgebench/broker/shaper.hpp"
#include "edgebench/harness/breakdown.hpp"
#include "edgebench/harness/stats.hpp"
#include "edgebench/mqtt/codec.hpp"

namespace edgebench::harness {

enum class Format { Compact, Expanded };
const char* to_string(Format f);

struct ScenarioConfig {
  std::string name = "custom";
  Topology topology = Topology::Bridged;
  /// Simulated time (deterministic, fast) or real time over loopback TCP.
  bool simulated = false;
  double rate_hz = 10.0;
  std::size_t sample_count = 600;
  mqtt::QoS qos = mqtt::QoS::AtMostOnce;
  /// TLS with username/password on both client links; real time only.
  bool tls = false;
  Format format = Format::Compact;
  /// Fraction of the reference scan's packets sent.
  double size_ratio = 1.0;
  /// Emulated link between the vehicle and the broker, both directions.
  broker::ShaperConfig shaper;
  double cloud_detector_delay_ms = 43.4;
  double vehicle_detector_delay_ms = 72.2;
  /// Replace converter and detector by a loop-through stage.
  bool loop_through = false;
  bool single_sample_mode = false;
  std::uint64_t seed = 1;
  /// Offset of the processing host's clock against the vehicle's.
  Nanos cloud_clock_offset = 0;
  /// Time allowed after the last publish for samples to arrive.
  double drain_timeout_s = 10.0;

  /// Throws ValidationError.
  void validate() const;
};

class ScenarioAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Traces collected by one run, before analysis.
struct RawRun {
  std::size_t published = 0;
  std::vector<bus::TracingBlock> traces;
  std::size_t payload_bytes = 0;
  /// Backlog (published minus completed) sampled at each window boundary.
  std::vector<long> backlog;
};

struct RunHooks {
  /// Backlog sampling period; 0 disables sampling.
  Nanos window = 0;
};

/// Stands up the topology and drives it. Throws ScenarioAborted when the
/// broker cannot be reached.
RawRun collect_traces(const ScenarioConfig& cfg, const RunHooks& hooks = {});

struct Report {
  ScenarioConfig config;
  std::size_t published = 0;
  std::size_t missing = 0;
  std::size_t payload_bytes = 0;
  std::vector<LatencyBreakdown> samples;
  std::vector<std::string> notes;
};

/// Breakdowns of every complete trace, sorted by sample id. Samples lacking
/// probes are counted as missing; more than 1% missing throws ScenarioAborted
/// unless `tolerate_missing`.
Report analyze(const ScenarioConfig& cfg, const RawRun& run, bool tolerate_missing = false);

/// collect_traces followed by analyze.
Report run_scenario(const ScenarioConfig& cfg);

/// Named series of a report: every partial, "iface_plus_comm" and "total".
std::vector<std::pair<std::string, std::vector<double>>> report_series(const std::vector<LatencyBreakdown>& samples);

/// Assumptions recorded in every report.
std::vector<std::string> standard_notes(const ScenarioConfig& cfg);

}  // namespace edgebench::harness
