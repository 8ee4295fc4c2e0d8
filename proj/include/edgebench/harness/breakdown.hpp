#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgebench/bus/local_bus.hpp"
#include "edgebench/bus/probes.hpp"

namespace edgebench::harness {

/// One component's passage of one sample. `t_out` is the acknowledgement
/// time when the component waited for one.
struct ProbeRecord {
  std::uint64_t sample_id = 0;
  probes::Component component = probes::Component::Source;
  std::int64_t t_in = 0;
  std::int64_t t_out = 0;
  std::uint8_t clock_id = 0;
  bool operator==(const ProbeRecord&) const = default;
};

/// Folds the point probes of a trace into per-component records, in order of
/// first appearance. Throws std::invalid_argument if a probe is malformed.
std::vector<ProbeRecord> records_from_trace(const bus::TracingBlock& t);

enum class Topology { InVehicle, Bridged };

const char* to_string(Topology t);

inline constexpr std::size_t kPartialCount = 11;

/// Partial latencies in ms. For the in-vehicle topology only
/// cloud_prop_to_det (source to detector), detection and veh_prop_to_sink are
/// non-zero.
struct LatencyBreakdown {
  std::uint64_t sample_id = 0;
  double veh_prop_to_iface = 0;
  double veh_iface = 0;
  double comm_up = 0;
  double cloud_iface_in = 0;
  double cloud_prop_to_det = 0;
  double detection = 0;
  double cloud_prop_to_iface = 0;
  double cloud_iface_out = 0;
  double comm_down = 0;
  double veh_iface_in = 0;
  double veh_prop_to_sink = 0;
  double total = 0;

  std::array<double, kPartialCount> partials() const;
  double partial_sum() const;
  /// Interface partials plus communication.
  double iface_plus_comm() const;
  bool operator==(const LatencyBreakdown&) const = default;
};

/// Column names of the partials, in LatencyBreakdown order.
const std::array<const char*, kPartialCount>& partial_names();
/// Sets partial i (see partial_names) to v.
void set_partial(LatencyBreakdown& b, std::size_t i, double v);

class MissingProbe : public std::runtime_error {
 public:
  MissingProbe(std::uint64_t sample, const std::string& what) : std::runtime_error(what), sample_(sample) {}
  std::uint64_t sample_id() const { return sample_; }

 private:
  std::uint64_t sample_;
};

class ClockViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Same-clock partials from the records; the communication share is the
/// total minus their sum, split evenly between the two directions.
LatencyBreakdown assemble_breakdown(const std::vector<ProbeRecord>& records, Topology topo);

}  // namespace edgebench::harness
