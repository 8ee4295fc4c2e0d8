#include "edgebench/mqtt/codec.hpp"

#include "edgebench/mqtt/topic.hpp"

namespace edgebench::mqtt {

namespace {

enum Type : std::uint8_t {
  kConnect = 1,
  kConnack = 2,
  kPublish = 3,
  kPuback = 4,
  kPubrec = 5,
  kPubrel = 6,
  kPubcomp = 7,
  kSubscribe = 8,
  kSuback = 9,
  kUnsubscribe = 10,
  kUnsuback = 11,
  kPingreq = 12,
  kPingresp = 13,
  kDisconnect = 14,
};

// Largest body we accept: 16 MiB payload plus a maximal topic and packet id.
constexpr std::uint32_t kMaxBody = kMaxPayload + 2 + 65535 + 2;

void put_string(Bytes& out, std::string_view s) {
  if (s.size() > 65535) throw InvalidPacket("string field exceeds 65535 bytes");
  put_be16(out, static_cast<std::uint16_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

void put_binary(Bytes& out, ByteView b) {
  if (b.size() > 65535) throw InvalidPacket("binary field exceeds 65535 bytes");
  put_be16(out, static_cast<std::uint16_t>(b.size()));
  out.insert(out.end(), b.begin(), b.end());
}

void require_id(std::uint16_t id) {
  if (id == 0) throw InvalidPacket("packet identifier must be non-zero");
}

void put_header(Bytes& out, std::uint8_t first, std::size_t body_len) {
  if (body_len > kMaxRemainingLength) throw InvalidPacket("frame too large");
  out.push_back(first);
  const auto len = encode_remaining_length(static_cast<std::uint32_t>(body_len));
  out.insert(out.end(), len.begin(), len.end());
}

// Body-level reader with bounds checking; any failure means the frame is malformed.
class Reader {
 public:
  explicit Reader(ByteView body) : body_(body) {}

  bool u8(std::uint8_t& v) {
    if (pos_ + 1 > body_.size()) return false;
    v = body_[pos_++];
    return true;
  }
  bool u16(std::uint16_t& v) {
    if (pos_ + 2 > body_.size()) return false;
    v = get_be16(body_.data() + pos_);
    pos_ += 2;
    return true;
  }
  bool bytes(Bytes& v) {
    std::uint16_t n;
    if (!u16(n) || pos_ + n > body_.size()) return false;
    v.assign(body_.begin() + static_cast<std::ptrdiff_t>(pos_), body_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return true;
  }
  bool string(std::string& v) {
    std::uint16_t n;
    if (!u16(n) || pos_ + n > body_.size()) return false;
    v.assign(reinterpret_cast<const char*>(body_.data() + pos_), n);
    pos_ += n;
    return true;
  }
  ByteView rest() {
    ByteView r = body_.subspan(pos_);
    pos_ = body_.size();
    return r;
  }
  bool done() const { return pos_ == body_.size(); }

 private:
  ByteView body_;
  std::size_t pos_ = 0;
};

DecodeResult malformed(std::string why) {
  DecodeResult r;
  r.status = DecodeStatus::Malformed;
  r.error = std::move(why);
  return r;
}

// Returns an error string, empty when the fixed-header flags are legal for the type.
const char* check_flags(std::uint8_t type, std::uint8_t flags) {
  switch (type) {
    case kPublish:
      if (((flags >> 1) & 0x3) == 3) return "PUBLISH with QoS 3";
      if (((flags >> 1) & 0x3) == 0 && (flags & 0x8)) return "PUBLISH QoS 0 with DUP set";
      return nullptr;
    case kPubrel:
    case kSubscribe:
      return flags == 0x2 ? nullptr : "invalid fixed-header flags";
    default:
      return flags == 0 ? nullptr : "invalid fixed-header flags";
  }
}

DecodeResult decode_body(std::uint8_t type, std::uint8_t flags, ByteView body) {
  Reader rd(body);
  DecodeResult r;
  r.status = DecodeStatus::Ok;

  auto ack = [&](auto pkt) -> DecodeResult {
    if (!rd.u16(pkt.packet_id) || !rd.done()) return malformed("bad acknowledgement length");
    if (pkt.packet_id == 0) return malformed("zero packet identifier");
    r.packet = pkt;
    return r;
  };

  switch (type) {
    case kConnect: {
      std::string proto;
      Connect c;
      std::uint8_t cflags;
      if (!rd.string(proto) || !rd.u8(c.protocol_level) || !rd.u8(cflags) || !rd.u16(c.keep_alive))
        return malformed("truncated CONNECT variable header");
      if (proto != "MQTT") return malformed("unknown protocol name");
      if (cflags & 0x01) return malformed("reserved CONNECT flag set");
      if (cflags & 0x04) return malformed("will messages are not supported");
      if (cflags & 0x38) return malformed("will QoS/retain set without will flag");
      const bool has_user = cflags & 0x80;
      const bool has_pass = cflags & 0x40;
      if (has_pass && !has_user) return malformed("password without username");
      c.clean_session = cflags & 0x02;
      if (!rd.string(c.client_id)) return malformed("truncated client id");
      if (!is_valid_utf8(c.client_id)) return malformed("client id is not valid UTF-8");
      if (has_user) {
        std::string u;
        if (!rd.string(u)) return malformed("truncated username");
        if (!is_valid_utf8(u)) return malformed("username is not valid UTF-8");
        c.username = std::move(u);
      }
      if (has_pass) {
        Bytes p;
        if (!rd.bytes(p)) return malformed("truncated password");
        c.password = std::move(p);
      }
      if (!rd.done()) return malformed("trailing bytes in CONNECT");
      r.packet = std::move(c);
      return r;
    }
    case kConnack: {
      Connack c;
      std::uint8_t ackf;
      if (!rd.u8(ackf) || !rd.u8(c.return_code) || !rd.done()) return malformed("bad CONNACK length");
      if (ackf & 0xFE) return malformed("reserved CONNACK flags set");
      c.session_present = ackf & 0x01;
      r.packet = c;
      return r;
    }
    case kPublish: {
      Publish p;
      p.retain = flags & 0x1;
      p.qos = static_cast<QoS>((flags >> 1) & 0x3);
      p.dup = flags & 0x8;
      if (!rd.string(p.topic)) return malformed("truncated topic");
      if (auto v = validate_topic(p.topic, TopicKind::Name)) return malformed(to_string(*v));
      if (p.qos != QoS::AtMostOnce) {
        std::uint16_t id;
        if (!rd.u16(id)) return malformed("truncated packet identifier");
        if (id == 0) return malformed("zero packet identifier");
        p.packet_id = id;
      }
      const ByteView payload = rd.rest();
      if (payload.size() > kMaxPayload) return malformed("payload exceeds limit");
      p.payload.assign(payload.begin(), payload.end());
      r.packet = std::move(p);
      return r;
    }
    case kPuback: return ack(Puback{});
    case kPubrec: return ack(Pubrec{});
    case kPubrel: return ack(Pubrel{});
    case kPubcomp: return ack(Pubcomp{});
    case kSubscribe: {
      Subscribe s;
      if (!rd.u16(s.packet_id)) return malformed("truncated SUBSCRIBE");
      if (s.packet_id == 0) return malformed("zero packet identifier");
      while (!rd.done()) {
        SubscribeEntry e;
        std::uint8_t q;
        if (!rd.string(e.filter) || !rd.u8(q)) return malformed("truncated subscription entry");
        if (!is_valid_utf8(e.filter)) return malformed("filter is not valid UTF-8");
        if (q > 2) return malformed("invalid requested QoS");
        e.qos = static_cast<QoS>(q);
        s.entries.push_back(std::move(e));
      }
      if (s.entries.empty()) return malformed("SUBSCRIBE without entries");
      r.packet = std::move(s);
      return r;
    }
    case kSuback: {
      Suback s;
      if (!rd.u16(s.packet_id)) return malformed("truncated SUBACK");
      if (s.packet_id == 0) return malformed("zero packet identifier");
      const ByteView codes = rd.rest();
      for (std::uint8_t c : codes) {
        if (c > 2 && c != kSubackFailure) return malformed("invalid SUBACK return code");
      }
      if (codes.empty()) return malformed("SUBACK without return codes");
      s.granted.assign(codes.begin(), codes.end());
      r.packet = std::move(s);
      return r;
    }
    case kPingreq:
    case kPingresp:
    case kDisconnect:
      if (!rd.done()) return malformed("non-empty body");
      if (type == kPingreq)
        r.packet = Pingreq{};
      else if (type == kPingresp)
        r.packet = Pingresp{};
      else
        r.packet = Disconnect{};
      return r;
    default:
      return malformed("unsupported packet type");
  }
}

struct Encoder {
  Bytes& out;

  void operator()(const Connect& c) {
    if (c.password && !c.username) throw InvalidPacket("password without username");
    if (!is_valid_utf8(c.client_id)) throw InvalidPacket("client id is not valid UTF-8");
    Bytes body;
    put_string(body, "MQTT");
    put_u8(body, c.protocol_level);
    std::uint8_t flags = 0;
    if (c.clean_session) flags |= 0x02;
    if (c.password) flags |= 0x40;
    if (c.username) flags |= 0x80;
    put_u8(body, flags);
    put_be16(body, c.keep_alive);
    put_string(body, c.client_id);
    if (c.username) put_string(body, *c.username);
    if (c.password) put_binary(body, *c.password);
    put_header(out, kConnect << 4, body.size());
    out.insert(out.end(), body.begin(), body.end());
  }

  void operator()(const Connack& c) {
    put_header(out, kConnack << 4, 2);
    put_u8(out, c.session_present ? 1 : 0);
    put_u8(out, c.return_code);
  }

  void operator()(const Publish& p) {
    if (auto v = validate_topic(p.topic, TopicKind::Name)) throw InvalidPacket(to_string(*v));
    if (p.qos == QoS::AtMostOnce) {
      if (p.packet_id) throw InvalidPacket("QoS 0 PUBLISH must not carry a packet identifier");
      if (p.dup) throw InvalidPacket("QoS 0 PUBLISH must not set DUP");
    } else {
      if (!p.packet_id) throw InvalidPacket("QoS>0 PUBLISH requires a packet identifier");
      require_id(*p.packet_id);
    }
    if (static_cast<std::uint8_t>(p.qos) > 2) throw InvalidPacket("invalid QoS");
    if (p.payload.size() > kMaxPayload) throw InvalidPacket("payload exceeds limit");
    std::uint8_t first = kPublish << 4;
    if (p.dup) first |= 0x8;
    first |= static_cast<std::uint8_t>(static_cast<std::uint8_t>(p.qos) << 1);
    if (p.retain) first |= 0x1;
    const std::size_t body = 2 + p.topic.size() + (p.packet_id ? 2 : 0) + p.payload.size();
    out.reserve(out.size() + 5 + body);
    put_header(out, first, body);
    put_string(out, p.topic);
    if (p.packet_id) put_be16(out, *p.packet_id);
    out.insert(out.end(), p.payload.begin(), p.payload.end());
  }

  void ack(std::uint8_t first, std::uint16_t id) {
    require_id(id);
    put_header(out, first, 2);
    put_be16(out, id);
  }
  void operator()(const Puback& a) { ack(kPuback << 4, a.packet_id); }
  void operator()(const Pubrec& a) { ack(kPubrec << 4, a.packet_id); }
  void operator()(const Pubrel& a) { ack((kPubrel << 4) | 0x2, a.packet_id); }
  void operator()(const Pubcomp& a) { ack(kPubcomp << 4, a.packet_id); }

  void operator()(const Subscribe& s) {
    require_id(s.packet_id);
    if (s.entries.empty()) throw InvalidPacket("SUBSCRIBE requires at least one entry");
    Bytes body;
    put_be16(body, s.packet_id);
    for (const auto& e : s.entries) {
      if (auto v = validate_topic(e.filter, TopicKind::Filter)) throw InvalidPacket(to_string(*v));
      if (static_cast<std::uint8_t>(e.qos) > 2) throw InvalidPacket("invalid QoS");
      put_string(body, e.filter);
      put_u8(body, static_cast<std::uint8_t>(e.qos));
    }
    put_header(out, (kSubscribe << 4) | 0x2, body.size());
    out.insert(out.end(), body.begin(), body.end());
  }

  void operator()(const Suback& s) {
    require_id(s.packet_id);
    if (s.granted.empty()) throw InvalidPacket("SUBACK requires at least one return code");
    for (std::uint8_t c : s.granted) {
      if (c > 2 && c != kSubackFailure) throw InvalidPacket("invalid SUBACK return code");
    }
    put_header(out, kSuback << 4, 2 + s.granted.size());
    put_be16(out, s.packet_id);
    out.insert(out.end(), s.granted.begin(), s.granted.end());
  }

  void operator()(const Pingreq&) { put_header(out, kPingreq << 4, 0); }
  void operator()(const Pingresp&) { put_header(out, kPingresp << 4, 0); }
  void operator()(const Disconnect&) { put_header(out, kDisconnect << 4, 0); }
};

}  // namespace

std::optional<QoS> qos_from_int(int v) {
  if (v < 0 || v > 2) return std::nullopt;
  return static_cast<QoS>(v);
}

std::uint8_t packet_type(const ControlPacket& p) {
  static constexpr std::uint8_t kTypes[] = {kConnect, kConnack, kPublish,  kPuback, kPubrec,   kPubrel,
                                            kPubcomp, kSubscribe, kSuback, kPingreq, kPingresp, kDisconnect};
  return kTypes[p.index()];
}

const char* packet_name(const ControlPacket& p) {
  static constexpr const char* kNames[] = {"CONNECT", "CONNACK",   "PUBLISH", "PUBACK",  "PUBREC",   "PUBREL",
                                           "PUBCOMP", "SUBSCRIBE", "SUBACK",  "PINGREQ", "PINGRESP", "DISCONNECT"};
  return kNames[p.index()];
}

std::vector<std::uint8_t> encode_remaining_length(std::uint32_t n) {
  if (n > kMaxRemainingLength) throw OutOfRange("remaining length exceeds 268435455");
  std::vector<std::uint8_t> out;
  do {
    std::uint8_t byte = n % 128;
    n /= 128;
    if (n > 0) byte |= 0x80;
    out.push_back(byte);
  } while (n > 0);
  return out;
}

VarintResult decode_remaining_length(ByteView buf) {
  VarintResult r;
  std::uint32_t multiplier = 1;
  std::uint32_t value = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (i >= buf.size()) return r;  // NeedMoreData
    const std::uint8_t b = buf[i];
    value += (b & 0x7F) * multiplier;
    if ((b & 0x80) == 0) {
      r.status = DecodeStatus::Ok;
      r.value = value;
      r.consumed = i + 1;
      return r;
    }
    multiplier *= 128;
  }
  r.status = DecodeStatus::Malformed;
  return r;
}

void encode_packet_into(const ControlPacket& p, Bytes& out) { std::visit(Encoder{out}, p); }

Bytes encode_packet(const ControlPacket& p) {
  Bytes out;
  encode_packet_into(p, out);
  return out;
}

DecodeResult decode_packet(ByteView buf) {
  if (buf.empty()) return {};
  const std::uint8_t type = buf[0] >> 4;
  const std::uint8_t flags = buf[0] & 0x0F;
  if (type == 0 || type == 15) return malformed("reserved packet type");
  if (type == kUnsubscribe || type == kUnsuback) return malformed("unsupported packet type");
  if (const char* why = check_flags(type, flags)) return malformed(why);

  const VarintResult len = decode_remaining_length(buf.subspan(1));
  if (len.status == DecodeStatus::NeedMoreData) return {};
  if (len.status == DecodeStatus::Malformed) return malformed("remaining length longer than 4 bytes");
  if (len.value > kMaxBody) return malformed("frame exceeds size limit");

  const std::size_t header = 1 + len.consumed;
  if (buf.size() < header + len.value) return {};

  DecodeResult r = decode_body(type, flags, buf.subspan(header, len.value));
  if (r.ok()) r.consumed = header + len.value;
  return r;
}

std::optional<QoS> publish_qos_of_frame(ByteView frame) {
  if (frame.empty() || (frame[0] >> 4) != kPublish) return std::nullopt;
  const int q = (frame[0] >> 1) & 0x3;
  return qos_from_int(q);
}

}  // namespace edgebench::mqtt
