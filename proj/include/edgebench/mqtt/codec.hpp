#pragma once

// MQTT 3.1.1 wire codec for the packet subset used by the broker and client.
// Unsubscribe, Will messages and MQTT 5 properties are outside the subset.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "edgebench/bytes.hpp"

namespace edgebench::mqtt {

enum class QoS : std::uint8_t { AtMostOnce = 0, AtLeastOnce = 1, ExactlyOnce = 2 };

inline constexpr std::uint8_t kProtocolLevel = 4;
inline constexpr std::uint32_t kMaxRemainingLength = 268'435'455;
/// Artifact limit on an accepted frame body (16 MiB).
inline constexpr std::uint32_t kMaxPayload = 16u * 1024u * 1024u;
inline constexpr std::uint8_t kSubackFailure = 0x80;

std::optional<QoS> qos_from_int(int v);

struct Connect {
  std::string client_id;
  std::optional<std::string> username;
  std::optional<Bytes> password;
  std::uint16_t keep_alive = 60;
  bool clean_session = true;
  /// Decoded as sent; the broker refuses anything but level 4.
  std::uint8_t protocol_level = kProtocolLevel;
  bool operator==(const Connect&) const = default;
};

struct Connack {
  bool session_present = false;
  std::uint8_t return_code = 0;
  bool operator==(const Connack&) const = default;
};

struct Publish {
  std::string topic;
  std::optional<std::uint16_t> packet_id;
  QoS qos = QoS::AtMostOnce;
  bool dup = false;
  bool retain = false;
  Bytes payload;
  bool operator==(const Publish&) const = default;
};

struct Puback {
  std::uint16_t packet_id = 0;
  bool operator==(const Puback&) const = default;
};
struct Pubrec {
  std::uint16_t packet_id = 0;
  bool operator==(const Pubrec&) const = default;
};
struct Pubrel {
  std::uint16_t packet_id = 0;
  bool operator==(const Pubrel&) const = default;
};
struct Pubcomp {
  std::uint16_t packet_id = 0;
  bool operator==(const Pubcomp&) const = default;
};

struct SubscribeEntry {
  std::string filter;
  QoS qos = QoS::AtMostOnce;
  bool operator==(const SubscribeEntry&) const = default;
};

struct Subscribe {
  std::uint16_t packet_id = 0;
  std::vector<SubscribeEntry> entries;
  bool operator==(const Subscribe&) const = default;
};

struct Suback {
  std::uint16_t packet_id = 0;
  std::vector<std::uint8_t> granted;
  bool operator==(const Suback&) const = default;
};

struct Pingreq {
  bool operator==(const Pingreq&) const = default;
};
struct Pingresp {
  bool operator==(const Pingresp&) const = default;
};
struct Disconnect {
  bool operator==(const Disconnect&) const = default;
};

using ControlPacket = std::variant<Connect, Connack, Publish, Puback, Pubrec, Pubrel, Pubcomp, Subscribe, Suback,
                                   Pingreq, Pingresp, Disconnect>;

/// Wire packet type nibble of a packet.
std::uint8_t packet_type(const ControlPacket& p);
const char* packet_name(const ControlPacket& p);

class OutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class InvalidPacket : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Minimal base-128 varint, 1..4 bytes. Throws OutOfRange above 268435455.
std::vector<std::uint8_t> encode_remaining_length(std::uint32_t n);

enum class DecodeStatus { Ok, NeedMoreData, Malformed };

struct VarintResult {
  DecodeStatus status = DecodeStatus::NeedMoreData;
  std::uint32_t value = 0;
  std::size_t consumed = 0;
};

VarintResult decode_remaining_length(ByteView buf);

/// Encodes a complete frame. Throws InvalidPacket when type invariants do not hold.
Bytes encode_packet(const ControlPacket& p);

/// Appends the frame to `out` (avoids a copy for large publishes).
void encode_packet_into(const ControlPacket& p, Bytes& out);

struct DecodeResult {
  DecodeStatus status = DecodeStatus::NeedMoreData;
  ControlPacket packet{Pingreq{}};
  std::size_t consumed = 0;
  std::string error;

  bool ok() const { return status == DecodeStatus::Ok; }
};

/// Decodes one frame from the front of `buf`. Never consumes a partial frame.
DecodeResult decode_packet(ByteView buf);

/// Cheap inspection used by shapers and fault injectors: is this an application
/// PUBLISH frame, and at which QoS? Only looks at the first byte.
std::optional<QoS> publish_qos_of_frame(ByteView frame);

}  // namespace edgebench::mqtt
