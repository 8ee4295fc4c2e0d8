#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "edgebench/bytes.hpp"

namespace edgebench::broker {

/// Emulated link conditions for one direction of a client link.
struct ShaperConfig {
  double one_way_delay_ms = 0.0;
  /// Standard deviation of the Gaussian added to the delay; the sum is clamped at 0.
  double jitter_stddev_ms = 0.0;
  /// Bytes per second; 0 means unlimited.
  double bandwidth_cap = 0.0;
  /// Applies to QoS-0 application PUBLISH frames only.
  double drop_probability = 0.0;
  std::uint64_t seed = 1;

  bool active() const {
    return one_way_delay_ms > 0 || jitter_stddev_ms > 0 || bandwidth_cap > 0 || drop_probability > 0;
  }
  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

enum class FrameClass { ApplicationQos0, Application, Control };

/// FIFO link model: serialization at the bandwidth cap, then propagation delay
/// with jitter. Delivery times never decrease.
class Shaper {
 public:
  explicit Shaper(ShaperConfig cfg);

  /// Delivery time for a frame handed to the link at `now`, or nullopt if dropped.
  std::optional<Nanos> shape(std::size_t frame_len, FrameClass cls, Nanos now);

  const ShaperConfig& config() const { return cfg_; }
  std::uint64_t dropped() const { return dropped_; }
  /// Time at which the link finishes serializing everything handed to it.
  Nanos busy_until() const { return link_free_; }

 private:
  Nanos jitter(FrameClass cls);

  ShaperConfig cfg_;
  // Application frames and control frames draw from separate streams so that
  // acknowledgement traffic does not shift the jitter seen by messages.
  std::mt19937_64 app_rng_;
  std::mt19937_64 ctl_rng_;
  std::mt19937_64 drop_rng_;
  Nanos link_free_ = 0;
  Nanos last_delivery_ = 0;
  std::uint64_t dropped_ = 0;
};

}  // namespace edgebench::broker
