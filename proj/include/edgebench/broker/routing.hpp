#pragma once

// Connection-independent broker state: sessions, subscriptions, and the QoS
// state machines. The Broker driver feeds it decoded packets and transmits
// whatever it returns.

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "edgebench/broker/credentials.hpp"
#include "edgebench/mqtt/codec.hpp"

namespace edgebench::broker {

enum class OutState { AwaitPuback, AwaitPubrec, AwaitPubcomp };

struct Inflight {
  mqtt::Publish publish;
  OutState state = OutState::AwaitPuback;
  int retransmits = 0;
};

struct Session {
  std::string client_id;
  bool clean_session = true;
  bool connected = false;
  std::uint64_t generation = 0;
  std::vector<mqtt::SubscribeEntry> subscriptions;
  /// Received QoS-2 messages awaiting PUBREL.
  std::map<std::uint16_t, mqtt::Publish> inbound_qos2;
  std::map<std::uint16_t, Inflight> outbound_inflight;
  /// Deliveries waiting for a free packet id or for the client to reconnect.
  std::deque<mqtt::Publish> pending;
  std::uint16_t next_packet_id = 1;
  /// Released QoS-2 ids, kept until the client reuses them, so that a
  /// retransmitted PUBREL is answered however late it comes.
  std::set<std::uint16_t> released_inbound;
  /// Recently completed outbound ids, for late duplicate acks.
  std::deque<std::uint16_t> recent_outbound;
};

/// A packet the driver must send to a given client.
struct Outgoing {
  std::string client_id;
  mqtt::ControlPacket packet;
};

struct StepResult {
  std::vector<mqtt::ControlPacket> responses;
  std::vector<Outgoing> deliveries;
  bool violation = false;
  std::string error;
  /// Application messages handed to routing by this step (0 or 1).
  int routed = 0;
};

struct ConnectOutcome {
  mqtt::Connack connack;
  bool accepted = false;
  /// A live connection already held this client_id and must be closed.
  bool took_over = false;
  std::uint64_t generation = 0;
  /// Inflight retransmissions and queued deliveries for a resumed session.
  std::vector<mqtt::ControlPacket> resend;
};

enum class RetransmitAction { None, Resend, Exhausted };

struct RetransmitResult {
  RetransmitAction action = RetransmitAction::None;
  std::optional<mqtt::ControlPacket> packet;
};

class RoutingCore {
 public:
  explicit RoutingCore(CredentialStore creds = {}, std::size_t offline_queue_limit = 1000, int max_retransmits = 3);

  ConnectOutcome handle_connect(const mqtt::Connect& c);
  /// Connection with this generation went away. Clean sessions are discarded.
  void disconnected(const std::string& client_id, std::uint64_t generation);

  mqtt::Suback subscribe(const std::string& client_id, const mqtt::Subscribe& s);

  /// Fans a message out to every matching session. QoS>=1 deliveries enter the
  /// session's inflight table (or its pending queue when ids are exhausted or
  /// the client is offline).
  std::vector<Outgoing> route_publish(const mqtt::Publish& p, const std::string& from);

  /// QoS state machines for Publish/Puback/Pubrec/Pubrel/Pubcomp.
  StepResult step_qos(const std::string& client_id, const mqtt::ControlPacket& pkt);

  /// Retransmission timer for (client, packet id) fired.
  RetransmitResult retransmit(const std::string& client_id, std::uint16_t packet_id);

  const Session* session(const std::string& client_id) const;
  std::size_t session_count() const { return sessions_.size(); }
  std::uint64_t routed_messages() const { return routed_; }
  std::uint64_t dropped_offline() const { return dropped_offline_; }

 private:
  std::optional<std::uint16_t> allocate_id(Session& s);
  // Moves pending deliveries into flight while ids are free.
  void drain_pending(Session& s, std::vector<Outgoing>& out);
  void enqueue(Session& s, mqtt::Publish p, std::vector<Outgoing>& out);

  CredentialStore creds_;
  std::size_t offline_queue_limit_;
  int max_retransmits_;
  std::map<std::string, Session> sessions_;
  std::uint64_t next_generation_ = 1;
  std::uint64_t routed_ = 0;
  std::uint64_t dropped_offline_ = 0;
};

}  // namespace edgebench::broker
