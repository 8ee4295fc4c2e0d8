#pragma once

// Application stages around the bridges: the scan source and the result sink
// on the vehicle, the converter and the detector (or a loop-through) on the
// processing side. Each stage stamps In/Out probes on the sample's trace.

#include <atomic>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "edgebench/bus/local_bus.hpp"
#include "edgebench/scan/detect.hpp"

namespace edgebench::harness {

inline constexpr const char* kTagCompact = "scan/compact";
inline constexpr const char* kTagExpanded = "scan/expanded";
inline constexpr const char* kTagObjects = "objects";

/// Modeled compute costs on simulated executors.
struct SimCosts {
  Nanos convert_per_point = 60;
  Nanos cluster_per_point = 20;
};

class Source : public std::enable_shared_from_this<Source> {
 public:
  static std::shared_ptr<Source> create(std::shared_ptr<bus::LocalBus> bus, std::shared_ptr<Executor> exec,
                                        std::string topic, std::string type_tag, SharedBytes payload, double rate_hz,
                                        std::size_t count, std::uint8_t clock_id);
  /// Sample i (from 1) is published at local time first_at + (i-1)/rate.
  void start(Nanos first_at);
  void stop();
  std::size_t published() const { return published_.load(); }
  std::size_t count() const { return count_; }

 private:
  Source() = default;
  void emit(std::size_t i);

  std::shared_ptr<bus::LocalBus> bus_;
  std::shared_ptr<Executor> exec_;
  std::string topic_, tag_;
  SharedBytes payload_;
  Nanos period_ = 0;
  std::size_t count_ = 0;
  std::uint8_t clock_ = 0;
  Nanos first_ = 0;
  std::atomic<std::size_t> published_{0};
  std::atomic<bool> stopped_{false};
};

/// Compact scan in, expanded cloud out.
class Converter : public std::enable_shared_from_this<Converter> {
 public:
  static std::shared_ptr<Converter> create(std::shared_ptr<bus::LocalBus> bus, std::shared_ptr<Executor> exec,
                                           std::string in_topic, std::string out_topic, std::uint8_t clock_id,
                                           SimCosts costs = {});
  void start();
  void stop();
  std::uint64_t errors() const { return errors_.load(); }

 private:
  Converter() = default;
  void on_message(const bus::MessagePtr& m);

  std::shared_ptr<bus::LocalBus> bus_;
  std::shared_ptr<Executor> exec_;
  std::string in_, out_;
  std::uint8_t clock_ = 0;
  SimCosts costs_;
  scan::Calibration calib_ = scan::Calibration::vlp32c();
  bus::SubscriptionPtr sub_;
  std::atomic<std::uint64_t> errors_{0};
};

/// Expanded cloud in, object list out. In loop-through mode the input is
/// forwarded unchanged, with probes but without any work.
class Detector : public std::enable_shared_from_this<Detector> {
 public:
  static std::shared_ptr<Detector> create(std::shared_ptr<bus::LocalBus> bus, std::shared_ptr<Executor> exec,
                                          std::string in_topic, std::string out_topic, std::uint8_t clock_id,
                                          scan::DetectConfig cfg, bool loop_through, SimCosts costs = {});
  void start();
  void stop();
  std::uint64_t errors() const { return errors_.load(); }
  std::uint64_t processed() const { return processed_.load(); }

 private:
  Detector() = default;
  void on_message(const bus::MessagePtr& m);

  std::shared_ptr<bus::LocalBus> bus_;
  std::shared_ptr<Executor> exec_;
  std::string in_, out_;
  std::uint8_t clock_ = 0;
  scan::DetectConfig cfg_;
  bool loop_through_ = false;
  SimCosts costs_;
  bus::SubscriptionPtr sub_;
  std::atomic<std::uint64_t> errors_{0};
  std::atomic<std::uint64_t> processed_{0};
};

class Sink : public std::enable_shared_from_this<Sink> {
 public:
  static std::shared_ptr<Sink> create(std::shared_ptr<bus::LocalBus> bus, std::shared_ptr<Executor> exec,
                                      std::string topic, std::uint8_t clock_id);
  void start();
  void stop();
  std::size_t received() const { return received_.load(); }
  /// Traces of every sample received so far, in arrival order.
  std::vector<bus::TracingBlock> traces() const;

 private:
  Sink() = default;
  void on_message(const bus::MessagePtr& m);

  std::shared_ptr<bus::LocalBus> bus_;
  std::shared_ptr<Executor> exec_;
  std::string topic_;
  std::uint8_t clock_ = 0;
  bus::SubscriptionPtr sub_;
  mutable std::mutex mu_;
  std::vector<bus::TracingBlock> traces_;
  std::atomic<std::size_t> received_{0};
};

}  // namespace edgebench::harness
