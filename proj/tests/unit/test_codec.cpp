#include <random>

#include "doctest.h"
#include "edgebench/mqtt/codec.hpp"
#include "edgebench/mqtt/topic.hpp"
#include "packet_gen.hpp"

using namespace edgebench;
using namespace edgebench::mqtt;

TEST_CASE("remaining length varint") {
  CHECK(encode_remaining_length(0) == std::vector<std::uint8_t>{0x00});
  CHECK(encode_remaining_length(127) == std::vector<std::uint8_t>{0x7F});
  CHECK(encode_remaining_length(128) == std::vector<std::uint8_t>{0x80, 0x01});
  CHECK(encode_remaining_length(kMaxRemainingLength).size() == 4);
  CHECK_THROWS_AS(encode_remaining_length(kMaxRemainingLength + 1), OutOfRange);

  const std::uint8_t zero[] = {0x00};
  auto r = decode_remaining_length(zero);
  CHECK(r.status == DecodeStatus::Ok);
  CHECK(r.value == 0);
  CHECK(r.consumed == 1);

  const std::uint8_t two[] = {0x80, 0x01};
  r = decode_remaining_length(two);
  CHECK(r.value == 128);
  CHECK(r.consumed == 2);

  const std::uint8_t cont[] = {0xFF};
  CHECK(decode_remaining_length(cont).status == DecodeStatus::NeedMoreData);
  const std::uint8_t too_long[] = {0xFF, 0xFF, 0xFF, 0xFF, 0x01};
  CHECK(decode_remaining_length(too_long).status == DecodeStatus::Malformed);

  for (std::uint32_t n : {1u, 16383u, 16384u, 2097151u, 2097152u, kMaxRemainingLength}) {
    auto enc = encode_remaining_length(n);
    auto dec = decode_remaining_length(enc);
    CHECK(dec.value == n);
    CHECK(dec.consumed == enc.size());
    // minimal length: no trailing zero continuation byte
    CHECK(enc.back() != 0x00);
  }
}

TEST_CASE("frame encodings") {
  CHECK(encode_packet(Pingreq{}) == Bytes{0xC0, 0x00});
  CHECK(encode_packet(Puback{1}) == Bytes{0x40, 0x02, 0x00, 0x01});
  Publish p;
  p.topic = "ping";
  CHECK(encode_packet(p) == Bytes{0x30, 0x06, 0x00, 0x04, 'p', 'i', 'n', 'g'});
  CHECK(encode_packet(Pubrel{3}) == Bytes{0x62, 0x02, 0x00, 0x03});
}

TEST_CASE("invalid packets are refused by the encoder") {
  Publish p;
  p.topic = "a";
  p.packet_id = 4;
  CHECK_THROWS_AS(encode_packet(p), InvalidPacket);
  p.packet_id.reset();
  p.qos = QoS::AtLeastOnce;
  CHECK_THROWS_AS(encode_packet(p), InvalidPacket);
  CHECK_THROWS_AS(encode_packet(Puback{0}), InvalidPacket);
}

TEST_CASE("decoder errors and truncation") {
  const std::uint8_t reserved0[] = {0x00, 0x00};
  CHECK(decode_packet(reserved0).status == DecodeStatus::Malformed);
  const std::uint8_t reserved15[] = {0xF0, 0x00};
  CHECK(decode_packet(reserved15).status == DecodeStatus::Malformed);
  const std::uint8_t bad_flags[] = {0x41, 0x02, 0x00, 0x01};
  CHECK(decode_packet(bad_flags).status == DecodeStatus::Malformed);

  Publish p;
  p.topic = "sensor/front";
  p.payload = {1, 2, 3};
  auto frame = encode_packet(p);
  CHECK(decode_packet(ByteView(frame).first(1)).status == DecodeStatus::NeedMoreData);

  // wildcard in a publish topic
  Bytes wild = {0x30, 0x03, 0x00, 0x01, '#'};
  CHECK(decode_packet(wild).status == DecodeStatus::Malformed);
  // invalid UTF-8 topic
  Bytes utf = {0x30, 0x03, 0x00, 0x01, 0xFF};
  CHECK(decode_packet(utf).status == DecodeStatus::Malformed);
}

TEST_CASE("random packets round-trip and prefixes never decode") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 3000; ++i) {
    const auto pkt = testgen::random_packet(rng);
    const auto frame = encode_packet(pkt);
    const auto r = decode_packet(frame);
    REQUIRE(r.ok());
    CHECK(r.consumed == frame.size());
    CHECK(r.packet == pkt);
    for (std::size_t k = 0; k < frame.size(); ++k)
      CHECK(decode_packet(ByteView(frame).first(k)).status == DecodeStatus::NeedMoreData);
  }
}

TEST_CASE("publish_qos_of_frame") {
  Publish p;
  p.topic = "x";
  p.qos = QoS::ExactlyOnce;
  p.packet_id = 2;
  CHECK(publish_qos_of_frame(encode_packet(p)) == QoS::ExactlyOnce);
  CHECK(!publish_qos_of_frame(encode_packet(Pingreq{})));
}

TEST_CASE("topic validation") {
  CHECK(!validate_topic("ping", TopicKind::Name));
  CHECK(validate_topic("a/#/b", TopicKind::Filter) == TopicViolation::HashNotLast);
  CHECK(!validate_topic("a/+", TopicKind::Filter));
  CHECK(validate_topic("a/+", TopicKind::Name) == TopicViolation::WildcardInName);
  CHECK(validate_topic("", TopicKind::Name) == TopicViolation::Empty);
  CHECK(validate_topic("a/b#", TopicKind::Filter) == TopicViolation::HashNotWholeSegment);
  CHECK(validate_topic("a+/b", TopicKind::Filter) == TopicViolation::PlusNotWholeSegment);
  CHECK(validate_topic(std::string("a\0b", 3), TopicKind::Name) == TopicViolation::NullCharacter);
  CHECK(validate_topic("\xED\xA0\x80", TopicKind::Name) == TopicViolation::InvalidUtf8);
  CHECK(validate_topic(std::string(70000, 'a'), TopicKind::Name) == TopicViolation::TooLong);
}

TEST_CASE("topic matching") {
  CHECK(topic_matches("ping", "ping"));
  CHECK(topic_matches("sensor/+/points", "sensor/front/points"));
  CHECK(topic_matches("#", "a/b/c"));
  CHECK(topic_matches("a/#", "a"));
  CHECK(!topic_matches("a/+", "a/b/c"));
  CHECK(!topic_matches("#", "$SYS/x"));
  CHECK(topic_matches("+/+", "/x"));
  CHECK(!topic_matches("ping", "pong"));
}
