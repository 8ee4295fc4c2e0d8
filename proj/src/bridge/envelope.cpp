#include "edgebench/bridge/envelope.hpp"

#include <limits>

namespace edgebench::bridge {

namespace {
constexpr std::uint8_t kMagic[4] = {'E', 'V', 'B', '1'};
constexpr std::uint8_t kFlagTracing = 0x01;
constexpr std::size_t kProbeSize = 11;
}  // namespace

Bytes encode_envelope(ByteView payload, const std::optional<bus::TracingBlock>& tracing) {
  Bytes out;
  out.reserve(kEnvelopeHeader + (tracing ? 10 + kProbeSize * tracing->probes.size() : 0) + payload.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(tracing ? kFlagTracing : 0);
  if (tracing) {
    if (tracing->probes.size() > std::numeric_limits<std::uint16_t>::max())
      throw std::length_error("too many probes");
    put_be64(out, tracing->sample_id);
    put_be16(out, static_cast<std::uint16_t>(tracing->probes.size()));
    for (const auto& p : tracing->probes) {
      put_be16(out, p.probe_id);
      put_be64(out, p.t);
      out.push_back(p.clock);
    }
  }
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

DecodedEnvelope decode_envelope(ByteView b) {
  if (b.size() < kEnvelopeHeader) throw EnvelopeError(EnvelopeError::Kind::TruncatedEnvelope, "envelope shorter than header");
  if (!std::equal(std::begin(kMagic), std::end(kMagic), b.begin()))
    throw EnvelopeError(EnvelopeError::Kind::BadMagic, "bad envelope magic");
  const std::uint8_t flags = b[4];
  std::size_t off = kEnvelopeHeader;
  DecodedEnvelope d;
  if (flags & kFlagTracing) {
    if (b.size() < off + 10) throw EnvelopeError(EnvelopeError::Kind::TruncatedEnvelope, "truncated tracing block");
    bus::TracingBlock t;
    t.sample_id = get_be64(&b[off]);
    const std::size_t n = get_be16(&b[off + 8]);
    off += 10;
    if (b.size() < off + n * kProbeSize) throw EnvelopeError(EnvelopeError::Kind::TruncatedEnvelope, "truncated probes");
    t.probes.reserve(n);
    for (std::size_t i = 0; i < n; ++i, off += kProbeSize)
      t.probes.push_back({get_be16(&b[off]), get_be64(&b[off + 2]), b[off + 10]});
    d.tracing = std::move(t);
  }
  d.payload = b.subspan(off);
  return d;
}

Bytes serialize_message(const std::string& type_tag, ByteView value) {
  if (type_tag.size() > std::numeric_limits<std::uint16_t>::max()) throw std::length_error("type tag too long");
  Bytes out;
  out.reserve(2 + type_tag.size() + value.size());
  put_be16(out, static_cast<std::uint16_t>(type_tag.size()));
  out.insert(out.end(), type_tag.begin(), type_tag.end());
  out.insert(out.end(), value.begin(), value.end());
  return out;
}

MessageView parse_message(ByteView b) {
  if (b.size() < 2) throw EnvelopeError(EnvelopeError::Kind::TruncatedEnvelope, "missing type tag length");
  const std::size_t n = get_be16(b.data());
  if (b.size() < 2 + n) throw EnvelopeError(EnvelopeError::Kind::TruncatedEnvelope, "truncated type tag");
  return {std::string(reinterpret_cast<const char*>(b.data() + 2), n), b.subspan(2 + n)};
}

}  // namespace edgebench::bridge
