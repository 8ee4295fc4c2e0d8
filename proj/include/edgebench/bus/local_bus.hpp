#pragma once

// In-process publish/subscribe. Subscribers receive the publisher's message
// instance itself (shared, immutable); payload bytes are never copied.

#include <atomic>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "edgebench/bytes.hpp"
#include "edgebench/runtime/executor.hpp"

namespace edgebench::bus {

struct Probe {
  std::uint16_t probe_id = 0;
  std::uint64_t t = 0;
  std::uint8_t clock = 0;
  bool operator==(const Probe&) const = default;
};

struct TracingBlock {
  std::uint64_t sample_id = 0;
  std::vector<Probe> probes;
  bool operator==(const TracingBlock&) const = default;
};

struct BusMessage {
  std::string topic;
  std::string type_tag;
  SharedBytes payload;
  std::uint64_t identity = 0;
  std::optional<TracingBlock> trace;
};

using MessagePtr = std::shared_ptr<const BusMessage>;
using Sink = std::function<void(const MessagePtr&)>;

class LocalBus;

class Subscription {
 public:
  ~Subscription();
  void unsubscribe();
  std::uint64_t dropped() const { return dropped_.load(); }
  std::uint64_t delivered() const { return delivered_.load(); }
  const std::string& topic() const { return topic_; }

 private:
  friend class LocalBus;
  Subscription(std::weak_ptr<LocalBus> bus, std::string topic, std::size_t queue_size,
               std::shared_ptr<Executor> exec, Sink sink, Nanos hop);
  void enqueue(const MessagePtr& m);
  void drain();

  std::weak_ptr<LocalBus> bus_;
  std::string topic_;
  std::size_t queue_size_;
  std::shared_ptr<Executor> exec_;
  Sink sink_;
  Nanos hop_;
  std::mutex mu_;
  std::deque<MessagePtr> queue_;
  bool scheduled_ = false;
  std::atomic<bool> active_{true};
  std::atomic<std::uint64_t> dropped_{0};
  std::atomic<std::uint64_t> delivered_{0};
  std::weak_ptr<Subscription> self_;
};

using SubscriptionPtr = std::shared_ptr<Subscription>;

class LocalBus : public std::enable_shared_from_this<LocalBus> {
 public:
  /// `sim_hop` is the modeled hand-off latency applied on simulated executors.
  static std::shared_ptr<LocalBus> create(Nanos sim_hop = 20'000);

  /// Builds a message with a fresh identity token.
  MessagePtr make(std::string topic, std::string type_tag, SharedBytes payload,
                  std::optional<TracingBlock> trace = std::nullopt);

  /// Hands `m` to every current subscriber of m->topic; returns how many.
  std::size_t publish(const MessagePtr& m);

  /// Sinks run sequentially on `exec`. Overflow beyond `queue_size` drops the oldest.
  SubscriptionPtr subscribe(const std::string& topic, std::size_t queue_size, std::shared_ptr<Executor> exec,
                            Sink sink);

  std::uint64_t published() const { return published_.load(); }

 private:
  friend class Subscription;
  explicit LocalBus(Nanos sim_hop) : sim_hop_(sim_hop) {}
  void remove(Subscription* s);

  Nanos sim_hop_;
  std::mutex mu_;
  std::map<std::string, std::vector<std::weak_ptr<Subscription>>> subs_;
  std::atomic<std::uint64_t> next_identity_{1};
  std::atomic<std::uint64_t> published_{0};
};

}  // namespace edgebench::bus
