#pragma once
// Random valid control packets for round-trip testing.
#include <random>
#include <string>

#include "edgebench/mqtt/codec.hpp"

namespace testgen {

using namespace edgebench::mqtt;

inline std::string random_segment(std::mt19937_64& rng) {
  static const char alphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789_-.";
  std::uniform_int_distribution<int> len(0, 6), ch(0, sizeof(alphabet) - 2);
  std::string s;
  for (int i = len(rng); i > 0; --i) s += alphabet[ch(rng)];
  return s;
}

inline std::string random_topic(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> segs(1, 4);
  std::string t;
  for (int i = segs(rng); i > 0; --i) {
    if (!t.empty() || i > 1) t += '/';
    t += random_segment(rng);
  }
  if (t.empty() || t == "/") t = "t";
  // a non-ASCII character now and then
  if (rng() % 8 == 0) t += "\xC3\xA9";
  return t;
}

inline std::string random_filter(std::mt19937_64& rng) {
  std::string t = random_topic(rng);
  switch (rng() % 4) {
    case 0: return t + "/#";
    case 1: return "+/" + t;
    case 2: return "#";
    default: return t;
  }
}

inline edgebench::Bytes random_bytes(std::mt19937_64& rng, std::size_t max_len) {
  edgebench::Bytes b(rng() % (max_len + 1));
  for (auto& x : b) x = static_cast<std::uint8_t>(rng());
  return b;
}

inline std::uint16_t random_id(std::mt19937_64& rng) { return static_cast<std::uint16_t>(1 + rng() % 65535); }

inline ControlPacket random_packet(std::mt19937_64& rng) {
  switch (rng() % 12) {
    case 0: {
      Connect c;
      c.client_id = random_segment(rng);
      if (rng() % 2) c.username = random_segment(rng);
      if (c.username && rng() % 2) c.password = random_bytes(rng, 16);
      c.keep_alive = static_cast<std::uint16_t>(rng());
      c.clean_session = rng() % 2;
      return c;
    }
    case 1: return Connack{bool(rng() % 2), static_cast<std::uint8_t>(rng() % 6)};
    case 2: {
      Publish p;
      p.topic = random_topic(rng);
      p.qos = static_cast<QoS>(rng() % 3);
      if (p.qos != QoS::AtMostOnce) {
        p.packet_id = random_id(rng);
        p.dup = rng() % 2;
      }
      p.retain = rng() % 2;
      p.payload = random_bytes(rng, rng() % 16 == 0 ? 400 : 40);
      return p;
    }
    case 3: return Puback{random_id(rng)};
    case 4: return Pubrec{random_id(rng)};
    case 5: return Pubrel{random_id(rng)};
    case 6: return Pubcomp{random_id(rng)};
    case 7: {
      Subscribe s;
      s.packet_id = random_id(rng);
      for (int i = 1 + rng() % 3; i > 0; --i) s.entries.push_back({random_filter(rng), static_cast<QoS>(rng() % 3)});
      return s;
    }
    case 8: {
      Suback s;
      s.packet_id = random_id(rng);
      for (int i = 1 + rng() % 3; i > 0; --i) {
        const auto r = rng() % 4;
        s.granted.push_back(r == 3 ? kSubackFailure : static_cast<std::uint8_t>(r));
      }
      return s;
    }
    case 9: return Pingreq{};
    case 10: return Pingresp{};
    default: return Disconnect{};
  }
}

}  // namespace testgen
