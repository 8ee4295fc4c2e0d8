#pragma once

#include <atomic>
#include <deque>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "edgebench/bridge/config.hpp"
#include "edgebench/bus/local_bus.hpp"
#include "edgebench/client/client.hpp"

namespace edgebench::bridge {

struct BridgeOptions {
  /// Clock id written into every probe taken by this bridge.
  std::uint8_t clock_id = 0;
  /// Process one sample at a time: the next bus message is taken only after
  /// the previous publish completed. Applies across all rules.
  bool single_sample = false;
  std::size_t bus_queue_size = 100;
  /// Modeled (de)serialization cost on simulated executors.
  double sim_bytes_per_second = 2.0e9;
  Nanos sim_fixed_cost = 5'000;
  /// When set, receives a JSON counters line every `status_period`.
  std::function<void(const std::string&)> status_sink;
  Nanos status_period = kSeconds;
};

struct BridgeCounters {
  std::atomic<std::uint64_t> bus_in{0};
  std::atomic<std::uint64_t> mqtt_out{0};
  std::atomic<std::uint64_t> mqtt_in{0};
  std::atomic<std::uint64_t> bus_out{0};
  std::atomic<std::uint64_t> decode_errors{0};
  std::atomic<std::uint64_t> publish_errors{0};
};

/// Forwards bus topics to MQTT and back according to a BridgeConfig. Runs on
/// the executor of its MQTT client.
class Bridge : public std::enable_shared_from_this<Bridge> {
 public:
  static std::shared_ptr<Bridge> create(std::shared_ptr<bus::LocalBus> bus, std::shared_ptr<client::Client> client,
                                        BridgeConfig cfg, BridgeOptions opts);

  /// Installs bus and MQTT subscriptions and starts the status timer.
  void start();
  void stop();

  const BridgeCounters& counters() const { return counters_; }
  std::uint64_t bus_drops() const;
  std::string status_json() const;
  const BridgeConfig& config() const { return cfg_; }

 private:
  Bridge(std::shared_ptr<bus::LocalBus> bus, std::shared_ptr<client::Client> client, BridgeConfig cfg,
         BridgeOptions opts);

  void on_bus(std::size_t rule, const bus::MessagePtr& m);
  void forward(std::size_t rule, const bus::MessagePtr& m);
  void on_mqtt(std::size_t rule, const mqtt::Publish& p);
  void publish_done();
  void merge_acks(bus::TracingBlock& t);
  Nanos sim_cost(std::size_t bytes) const;
  void arm_status();

  std::shared_ptr<Executor> exec_;
  std::shared_ptr<bus::LocalBus> bus_;
  std::shared_ptr<client::Client> client_;
  BridgeConfig cfg_;
  BridgeOptions opts_;
  BridgeCounters counters_;
  std::vector<bus::SubscriptionPtr> subs_;
  bool busy_ = false;
  std::deque<std::pair<std::size_t, bus::MessagePtr>> waiting_;
  std::map<std::uint64_t, std::vector<bus::Probe>> pending_acks_;
  std::deque<std::uint64_t> ack_order_;
  Timer status_timer_;
  bool stopped_ = false;
};

}  // namespace edgebench::bridge
