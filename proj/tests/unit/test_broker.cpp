#include <cmath>

#include "doctest.h"
#include "edgebench/broker/broker_config.hpp"
#include "edgebench/broker/routing.hpp"
#include "edgebench/broker/shaper.hpp"

using namespace edgebench;
using namespace edgebench::broker;
using namespace edgebench::mqtt;

namespace {

Connect conn(const std::string& id, bool clean = true) {
  Connect c;
  c.client_id = id;
  c.clean_session = clean;
  return c;
}

Publish pub(const std::string& topic, QoS q, std::optional<std::uint16_t> id = {}) {
  Publish p;
  p.topic = topic;
  p.qos = q;
  p.packet_id = id;
  p.payload = {1, 2, 3};
  return p;
}

}  // namespace

TEST_CASE("credentials") {
  const auto h = hash_password("password", 10);
  CHECK(h.rfind("pbkdf2-sha256$10$", 0) == 0);
  CHECK(verify_password("password", h));
  CHECK(!verify_password("Password", h));

  CredentialStore store;
  store.add_user("admin", "password");
  RoutingCore core(store);
  auto c = conn("vehicle");
  c.username = "admin";
  c.password = Bytes{'p', 'a', 's', 's', 'w', 'o', 'r', 'd'};
  CHECK(core.handle_connect(c).connack.return_code == 0);
  c.password = Bytes{'x'};
  CHECK(core.handle_connect(c).connack.return_code == 4);
  c.username.reset();
  c.password.reset();
  CHECK(core.handle_connect(c).connack.return_code == 5);
}

TEST_CASE("connect rules and takeover") {
  RoutingCore core;
  auto first = core.handle_connect(conn("vehicle"));
  CHECK(first.accepted);
  CHECK(!first.took_over);
  auto second = core.handle_connect(conn("vehicle"));
  CHECK(second.accepted);
  CHECK(second.took_over);
  CHECK(second.generation != first.generation);
  CHECK(core.session_count() == 1);

  auto old = conn("x");
  old.protocol_level = 5;
  CHECK(core.handle_connect(old).connack.return_code == 1);
  CHECK(core.handle_connect(conn("", false)).connack.return_code == 2);
}

TEST_CASE("routing fan-out and QoS downgrade") {
  RoutingCore core;
  core.handle_connect(conn("pub"));
  core.handle_connect(conn("sub"));
  CHECK(core.route_publish(pub("ping", QoS::AtMostOnce), "pub").empty());

  auto ack = core.subscribe("sub", Subscribe{1, {{"ping", QoS::AtMostOnce}}});
  CHECK(ack.granted == std::vector<std::uint8_t>{0});
  auto out = core.route_publish(pub("ping", QoS::AtMostOnce), "pub");
  REQUIRE(out.size() == 1);
  CHECK(out[0].client_id == "sub");

  out = core.route_publish(pub("ping", QoS::ExactlyOnce, 5), "pub");
  REQUIRE(out.size() == 1);
  const auto& d = std::get<Publish>(out[0].packet);
  CHECK(d.qos == QoS::AtMostOnce);
  CHECK(!d.packet_id);
}

TEST_CASE("QoS 1 flow") {
  RoutingCore core;
  core.handle_connect(conn("pub"));
  core.handle_connect(conn("sub"));
  core.subscribe("sub", Subscribe{1, {{"t", QoS::AtLeastOnce}}});
  auto r = core.step_qos("pub", pub("t", QoS::AtLeastOnce, 7));
  REQUIRE(r.responses.size() == 1);
  CHECK(std::get<Puback>(r.responses[0]).packet_id == 7);
  CHECK(r.routed == 1);
  REQUIRE(r.deliveries.size() == 1);
  const auto id = *std::get<Publish>(r.deliveries[0].packet).packet_id;
  CHECK(core.session("sub")->outbound_inflight.count(id) == 1);
  core.step_qos("sub", Puback{id});
  CHECK(core.session("sub")->outbound_inflight.empty());
}

TEST_CASE("QoS 2 inbound is exactly once") {
  RoutingCore core;
  core.handle_connect(conn("pub"));
  core.handle_connect(conn("sub"));
  core.subscribe("sub", Subscribe{1, {{"t", QoS::AtMostOnce}}});

  auto r = core.step_qos("pub", pub("t", QoS::ExactlyOnce, 9));
  REQUIRE(r.responses.size() == 1);
  CHECK(std::get<Pubrec>(r.responses[0]).packet_id == 9);
  auto dup = pub("t", QoS::ExactlyOnce, 9);
  dup.dup = true;
  r = core.step_qos("pub", dup);
  CHECK(std::get<Pubrec>(r.responses[0]).packet_id == 9);
  CHECK(r.deliveries.empty());
  CHECK(core.session("pub")->inbound_qos2.size() == 1);

  r = core.step_qos("pub", Pubrel{9});
  CHECK(std::get<Pubcomp>(r.responses[0]).packet_id == 9);
  CHECK(r.deliveries.size() == 1);
  CHECK(core.session("pub")->inbound_qos2.empty());

  // a retransmitted PUBREL and a stale duplicate are answered, not routed
  r = core.step_qos("pub", Pubrel{9});
  CHECK(!r.violation);
  CHECK(r.deliveries.empty());
  r = core.step_qos("pub", dup);
  CHECK(r.deliveries.empty());
  r = core.step_qos("pub", Pubrel{9});
  CHECK(r.deliveries.empty());
  CHECK(core.routed_messages() == 1);

  CHECK(core.step_qos("pub", Pubrel{44}).violation);
  CHECK(core.step_qos("pub", Puback{12}).violation);
}

TEST_CASE("QoS 2 outbound and retransmission") {
  RoutingCore core({}, 1000, 3);
  core.handle_connect(conn("pub"));
  core.handle_connect(conn("sub"));
  core.subscribe("sub", Subscribe{1, {{"t", QoS::ExactlyOnce}}});
  auto out = core.route_publish(pub("t", QoS::ExactlyOnce, 1), "pub");
  REQUIRE(out.size() == 1);
  const auto id = *std::get<Publish>(out[0].packet).packet_id;

  auto rt = core.retransmit("sub", id);
  CHECK(rt.action == RetransmitAction::Resend);
  CHECK(std::get<Publish>(*rt.packet).dup);

  auto r = core.step_qos("sub", Pubrec{id});
  CHECK(std::get<Pubrel>(r.responses[0]).packet_id == id);
  rt = core.retransmit("sub", id);
  CHECK(std::holds_alternative<Pubrel>(*rt.packet));
  core.step_qos("sub", Pubcomp{id});
  CHECK(core.retransmit("sub", id).action == RetransmitAction::None);

  out = core.route_publish(pub("t", QoS::ExactlyOnce, 2), "pub");
  const auto id2 = *std::get<Publish>(out[0].packet).packet_id;
  for (int i = 0; i < 3; ++i) CHECK(core.retransmit("sub", id2).action == RetransmitAction::Resend);
  CHECK(core.retransmit("sub", id2).action == RetransmitAction::Exhausted);
}

TEST_CASE("persistent sessions queue while offline") {
  RoutingCore core({}, 2);
  core.handle_connect(conn("pub"));
  auto first = core.handle_connect(conn("sub", false));
  core.subscribe("sub", Subscribe{1, {{"t", QoS::AtLeastOnce}}});
  core.disconnected("sub", first.generation);
  for (int i = 0; i < 3; ++i) CHECK(core.route_publish(pub("t", QoS::AtLeastOnce, 1), "pub").empty());
  CHECK(core.dropped_offline() == 1);
  auto again = core.handle_connect(conn("sub", false));
  CHECK(again.connack.session_present);
  CHECK(again.resend.size() == 2);
}

TEST_CASE("shaper delay, bandwidth and drops") {
  ShaperConfig c;
  c.one_way_delay_ms = 19;
  Shaper s(c);
  CHECK(s.shape(100, FrameClass::Application, 5 * kMillis) == 24 * kMillis);

  ShaperConfig bw;
  bw.bandwidth_cap = 1e7;
  Shaper b(bw);
  CHECK(b.shape(1'000'000, FrameClass::Application, 0) == 100 * kMillis);
  // the next frame queues behind the first
  CHECK(b.shape(1'000'000, FrameClass::Application, 0) == 200 * kMillis);

  ShaperConfig d;
  d.drop_probability = 1;
  Shaper dr(d);
  CHECK(!dr.shape(10, FrameClass::ApplicationQos0, 0));
  CHECK(dr.shape(10, FrameClass::Control, 0));
  CHECK(dr.shape(10, FrameClass::Application, 0));
  CHECK(dr.dropped() == 1);

  ShaperConfig bad;
  bad.drop_probability = 1.5;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("shaper is FIFO and seeded") {
  ShaperConfig c;
  c.one_way_delay_ms = 5;
  c.jitter_stddev_ms = 3;
  c.seed = 11;
  Shaper a(c), b(c);
  Nanos last = 0;
  for (int i = 0; i < 2000; ++i) {
    const Nanos now = i * 200'000;
    auto ta = a.shape(64, FrameClass::Application, now);
    auto tb = b.shape(64, FrameClass::Application, now);
    REQUIRE(ta);
    CHECK(*ta == *tb);
    CHECK(*ta >= last);
    CHECK(*ta >= now);
    last = *ta;
  }
}

TEST_CASE("shaper drop rate is binomial") {
  ShaperConfig c;
  c.drop_probability = 0.2;
  c.seed = 3;
  Shaper s(c);
  const int n = 5000;
  int delivered = 0;
  for (int i = 0; i < n; ++i)
    if (s.shape(10, FrameClass::ApplicationQos0, i)) ++delivered;
  const double sigma = std::sqrt(n * 0.2 * 0.8) / n;
  CHECK(std::abs(double(delivered) / n - 0.8) <= 3 * sigma);
}

TEST_CASE("broker config file") {
  const auto cfg = parse_broker_config(R"(
listeners:
  tcp: {host: 127.0.0.1, port: 1884}
  tls: {port: 8884}
users:
  - {user: admin, pass: password}
shapers:
  vehicle: {delay_ms: 19, jitter_ms: 1}
retransmit_ms: 500
)");
  REQUIRE(cfg.tcp);
  CHECK(cfg.tcp->port == 1884);
  REQUIRE(cfg.tls);
  CHECK(cfg.tls->port == 8884);
  CHECK(cfg.options.credentials.enabled());
  CHECK(cfg.options.shapers.at("vehicle").one_way_delay_ms == 19);
  CHECK(cfg.options.retransmit_initial == 500 * kMillis);

  CHECK_THROWS_AS(parse_broker_config("shapers: [1, 2"), ParseError);
  CHECK_THROWS_AS(parse_broker_config("shapers:\n  vehicle: {drop: 3}\n"), ValidationError);
}
