#pragma once

// Wire layout (big-endian):
//   "EVB1" | flags u8 (bit0: tracing) |
//   [sample_id u64 | count u16 | count x (probe_id u16, t u64, clock u8)] | payload
// The bridge's payload is a serialized bus message: tag_len u16 | type_tag | value.

#include <optional>
#include <stdexcept>
#include <string>

#include "edgebench/bus/local_bus.hpp"

namespace edgebench::bridge {

inline constexpr std::size_t kEnvelopeHeader = 5;

class EnvelopeError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, TruncatedEnvelope };
  EnvelopeError(Kind k, const std::string& what) : std::runtime_error(what), kind_(k) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

Bytes encode_envelope(ByteView payload, const std::optional<bus::TracingBlock>& tracing);

struct DecodedEnvelope {
  std::optional<bus::TracingBlock> tracing;
  /// View into the decoded buffer.
  ByteView payload;
};

/// Throws EnvelopeError.
DecodedEnvelope decode_envelope(ByteView bytes);

Bytes serialize_message(const std::string& type_tag, ByteView value);

struct MessageView {
  std::string type_tag;
  ByteView value;
};

/// Throws EnvelopeError (TruncatedEnvelope) when the tag length overruns.
MessageView parse_message(ByteView bytes);

}  // namespace edgebench::bridge
