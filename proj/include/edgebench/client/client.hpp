#pragma once

#include <atomic>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "edgebench/mqtt/codec.hpp"
#include "edgebench/runtime/transport.hpp"

namespace edgebench::client {

enum class ClientError {
  None,
  AuthFailure,
  ConnectFailed,
  BufferOverflow,
  Timeout,
  SubscriptionRefused,
  InvalidTopic,
  Closed,
};

const char* to_string(ClientError e);

struct ReconnectPolicy {
  bool enabled = true;
  Nanos backoff_initial = 100 * kMillis;
  Nanos backoff_max = 5 * kSeconds;
};

struct ClientOptions {
  std::string broker_host = "localhost";
  std::uint16_t broker_port = 1883;
  std::string client_id;
  std::optional<std::string> username;
  std::optional<std::string> password;
  bool tls = false;
  /// Trusted CA for the broker certificate; empty disables verification.
  std::string tls_ca_pem;
  std::uint16_t keep_alive = 60;
  bool clean_session = true;
  ReconnectPolicy reconnect;
  std::size_t outbound_buffer_limit = 100;
  /// On overflow: drop the oldest buffered message (true) or refuse the new one.
  bool drop_oldest = true;
  Nanos retransmit_initial = kSeconds;
  int max_retransmits = 3;
  Nanos connect_timeout = 10 * kSeconds;

  /// Throws std::invalid_argument.
  void validate() const;
};

/// TCP (optionally TLS) dialer for opts.broker_host:broker_port.
Dialer tcp_dialer_for(const ClientOptions& opts);

using Completion = std::function<void(ClientError)>;
using MessageSink = std::function<void(const mqtt::Publish&)>;

struct ClientStats {
  std::atomic<std::uint64_t> published{0};
  std::atomic<std::uint64_t> completed{0};
  std::atomic<std::uint64_t> delivered{0};
  std::atomic<std::uint64_t> dup_received{0};
  std::atomic<std::uint64_t> duplicates_suppressed{0};
  std::atomic<std::uint64_t> reconnects{0};
  std::atomic<std::uint64_t> buffer_drops{0};
  std::atomic<std::uint64_t> timeouts{0};
  std::atomic<std::uint64_t> retransmits{0};
};

/// MQTT 3.1.1 client. Public methods may be called from any thread; all work
/// runs on the client's executor, where sinks and completions are invoked.
class Client : public std::enable_shared_from_this<Client> {
 public:
  static std::shared_ptr<Client> create(std::shared_ptr<Executor> exec, Dialer dialer, ClientOptions opts);
  ~Client();

  /// Starts connecting. `done` fires once: on the first CONNACK(0), on
  /// AuthFailure, or on ConnectFailed when reconnect is disabled.
  void connect(std::function<void(ClientError)> done);
  /// `done` receives the granted level (or an error) once SUBACK arrives.
  void subscribe(std::string filter, mqtt::QoS qos, MessageSink sink,
                 std::function<void(ClientError, mqtt::QoS)> done = {});
  /// Completion: QoS 0 when the frame is handed to the transport, QoS 1 on
  /// PUBACK, QoS 2 on PUBCOMP.
  void publish(std::string topic, Bytes payload, mqtt::QoS qos, Completion done = {});
  /// Sends DISCONNECT and stops reconnecting. Pending completions get Closed.
  void disconnect();

  bool connected() const { return connected_flag_.load(); }
  const ClientStats& stats() const { return stats_; }
  const ClientOptions& options() const { return opts_; }
  Executor& executor() { return *exec_; }
  void on_connection_change(std::function<void(bool)> cb);

  /// Test hook: drop the current transport connection as if the link failed.
  void drop_connection();

 private:
  enum class State { Idle, Connecting, Connected, Backoff, Stopped };
  enum class OutState { AwaitPuback, AwaitPubrec, AwaitPubcomp };
  struct OutMsg {
    mqtt::Publish pub;
    Completion done;
    OutState state = OutState::AwaitPuback;
    int retransmits = 0;
    Timer timer;
  };
  struct Queued {
    std::string topic;
    Bytes payload;
    mqtt::QoS qos;
    Completion done;
  };
  struct Subscription {
    std::string filter;
    mqtt::QoS qos;
    MessageSink sink;
  };
  using SubDone = std::function<void(ClientError, mqtt::QoS)>;
  struct PendingSub {
    std::vector<std::string> filters;
    std::vector<SubDone> dones;
  };

  Client(std::shared_ptr<Executor> exec, Dialer dialer, ClientOptions opts);

  void start_connect();
  void on_dialed(ConnectionPtr c, const std::string& error);
  void on_data(std::uint64_t gen, ByteView data);
  void on_closed(std::uint64_t gen);
  void handle(const mqtt::ControlPacket& p);
  void handle_connack(const mqtt::Connack& c);
  void schedule_reconnect();
  void set_connected(bool v);
  void send(const mqtt::ControlPacket& p);
  void send_publish_now(Queued q);
  void flush_buffer();
  void buffer(Queued q);
  std::optional<std::uint16_t> allocate_id();
  void arm_retransmit(std::uint16_t id, Nanos delay);
  void finish(std::uint16_t id, ClientError e);
  void dispatch(const mqtt::Publish& p);
  void arm_keepalive();
  void fail_first(ClientError e);
  void send_subscribe(std::vector<std::string> filters);

  std::shared_ptr<Executor> exec_;
  Dialer dialer_;
  ClientOptions opts_;
  ClientStats stats_;
  std::atomic<bool> connected_flag_{false};

  State state_ = State::Idle;
  ConnectionPtr conn_;
  std::uint64_t gen_ = 0;
  Bytes inbuf_;
  Nanos backoff_ = 0;
  Timer connect_timer_;
  Timer backoff_timer_;
  Timer keepalive_timer_;
  Nanos last_tx_ = 0;
  Nanos last_rx_ = 0;
  bool ever_connected_ = false;
  std::function<void(ClientError)> first_done_;
  std::function<void(bool)> on_change_;

  std::uint16_t next_id_ = 1;
  std::map<std::uint16_t, OutMsg> inflight_;
  std::deque<Queued> buffer_;
  std::set<std::uint16_t> inbound_qos2_;
  // Released ids until reused; a dup=1 copy of one of them is stale.
  std::set<std::uint16_t> released_qos2_;
  std::vector<Subscription> subs_;
  std::map<std::uint16_t, PendingSub> pending_subs_;
  // Callbacks of subscriptions made while offline, keyed by filter.
  std::map<std::string, SubDone> unsent_sub_dones_;
};

}  // namespace edgebench::client
