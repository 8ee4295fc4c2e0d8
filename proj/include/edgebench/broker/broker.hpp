#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <string>

#include "edgebench/broker/routing.hpp"
#include "edgebench/broker/shaper.hpp"
#include "edgebench/runtime/transport.hpp"

namespace edgebench::broker {

struct BrokerOptions {
  CredentialStore credentials;
  /// Link emulation per client_id, applied to both directions of that link.
  std::map<std::string, ShaperConfig> shapers;
  Nanos retransmit_initial = kSeconds;
  int max_retransmits = 3;
  double keepalive_factor = 1.5;
  std::size_t offline_queue_limit = 1000;
  /// Receives one JSON object per line: client, direction, packet type, timestamp.
  std::function<void(const std::string&)> log;
};

struct BrokerStats {
  std::atomic<std::uint64_t> connections{0};
  std::atomic<std::uint64_t> frames_in{0};
  std::atomic<std::uint64_t> frames_out{0};
  std::atomic<std::uint64_t> routed{0};
  std::atomic<std::uint64_t> shaper_drops{0};
  std::atomic<std::uint64_t> violations{0};
  std::atomic<std::uint64_t> retransmits{0};
};

/// Drives RoutingCore over live connections. All state lives on one executor.
class Broker : public std::enable_shared_from_this<Broker> {
 public:
  static std::shared_ptr<Broker> create(std::shared_ptr<Executor> exec, BrokerOptions opts);
  ~Broker();

  /// Accept handler for listeners; must be invoked on the broker's executor.
  AcceptHandler acceptor();
  void attach(ConnectionPtr c);
  /// Closes every connection. Call on the broker's executor.
  void shutdown();

  const BrokerStats& stats() const { return stats_; }
  Executor& executor() { return *exec_; }
  /// Only safe on the broker's executor.
  const RoutingCore& core() const { return core_; }

 private:
  struct Link;
  struct Channel;
  struct ShapedPair;

  Broker(std::shared_ptr<Executor> exec, BrokerOptions opts);

  void on_data(std::uint64_t link_id, ByteView data);
  void process(std::uint64_t link_id, mqtt::ControlPacket pkt, std::size_t frame_len);
  void handle_connect(Link& l, const mqtt::Connect& c);
  void send_packet(Link& l, const mqtt::ControlPacket& p);
  void send_to(const std::string& client_id, const mqtt::ControlPacket& p);
  void close_link(std::uint64_t link_id);
  void on_closed(std::uint64_t link_id);
  void arm_retransmit(const std::string& client_id, std::uint16_t id, Nanos delay);
  void cancel_retransmit(const std::string& client_id, std::uint16_t id);
  void arm_keepalive(std::uint64_t link_id, Nanos at);
  void push(Channel& ch, Nanos at, std::uint64_t link_id, std::function<void(Link&)> fn);
  void arm_channel(Channel& ch);
  ShapedPair* shaped(const std::string& client_id);
  void log_packet(const Link& l, const char* dir, const mqtt::ControlPacket& p, std::size_t bytes);

  std::shared_ptr<Executor> exec_;
  BrokerOptions opts_;
  RoutingCore core_;
  BrokerStats stats_;
  std::uint64_t next_link_ = 1;
  std::map<std::uint64_t, std::unique_ptr<Link>> links_;
  std::map<std::string, std::uint64_t> client_links_;
  std::map<std::string, std::unique_ptr<ShapedPair>> shaped_;
  std::map<std::pair<std::string, std::uint16_t>, Timer> retransmit_timers_;
};

}  // namespace edgebench::broker
