#include <cmath>

#include "doctest.h"
#include "edgebench/config_error.hpp"
#include "edgebench/harness/presets.hpp"
#include "edgebench/harness/report_io.hpp"
#include "edgebench/harness/sweep.hpp"

using namespace edgebench;
using namespace edgebench::harness;
using probes::Component;
using probes::Edge;

namespace {

constexpr std::uint8_t V = probes::kVehicleClock, C = probes::kCloudClock;

// A bridged trace with the given partials (ns, in breakdown order) and
// one-way communication times; cloud probes read `offset` ahead.
bus::TracingBlock bridged_trace(const std::array<std::int64_t, 11>& p, std::int64_t up, std::int64_t down,
                                std::int64_t offset = 0) {
  bus::TracingBlock t{1, {}};
  auto probe = [&](Component c, Edge e, std::int64_t at, std::uint8_t clock) {
    t.probes.push_back({probes::probe_id(c, e), static_cast<std::uint64_t>(at + (clock == C ? offset : 0)), clock});
  };
  std::int64_t now = 1'000'000'000;
  probe(Component::Source, Edge::In, now, V);
  probe(Component::Source, Edge::Out, now, V);
  now += p[0];
  probe(Component::BridgeBusToMqtt, Edge::In, now, V);
  now += p[1];
  probe(Component::BridgeBusToMqtt, Edge::Out, now, V);
  now += up;
  probe(Component::BridgeMqttToBus, Edge::In, now, C);
  now += p[3];
  probe(Component::BridgeMqttToBus, Edge::Out, now, C);
  now += p[4];
  probe(Component::Detector, Edge::In, now, C);
  now += p[5];
  probe(Component::Detector, Edge::Out, now, C);
  now += p[6];
  probe(Component::BridgeBusToMqtt, Edge::In, now, C);
  now += p[7];
  probe(Component::BridgeBusToMqtt, Edge::Out, now, C);
  now += down;
  probe(Component::BridgeMqttToBus, Edge::In, now, V);
  now += p[9];
  probe(Component::BridgeMqttToBus, Edge::Out, now, V);
  now += p[10];
  probe(Component::Sink, Edge::In, now, V);
  return t;
}

LatencyBreakdown assemble(const bus::TracingBlock& t) {
  return assemble_breakdown(records_from_trace(t), Topology::Bridged);
}

ScenarioConfig small_sim(const std::string& preset, std::size_t n) {
  auto c = make_preset(preset).runs.at(0).config;
  c.simulated = true;
  c.sample_count = n;
  return c;
}

}  // namespace

TEST_CASE("records fold probes per component and clock") {
  bus::TracingBlock t{3,
                      {{probes::probe_id(Component::BridgeBusToMqtt, Edge::In), 10, V},
                       {probes::probe_id(Component::BridgeBusToMqtt, Edge::Out), 12, V},
                       {probes::probe_id(Component::BridgeBusToMqtt, Edge::In), 500, C},
                       {probes::probe_id(Component::BridgeBusToMqtt, Edge::Out), 501, C},
                       {probes::probe_id(Component::BridgeBusToMqtt, Edge::Ack), 40, V},
                       {probes::probe_id(Component::Sink, Edge::In), 60, V}}};
  auto r = records_from_trace(t);
  REQUIRE(r.size() == 3);
  CHECK(r[0] == ProbeRecord{3, Component::BridgeBusToMqtt, 10, 40, V});
  CHECK(r[1] == ProbeRecord{3, Component::BridgeBusToMqtt, 500, 501, C});
  CHECK(r[2] == ProbeRecord{3, Component::Sink, 60, 60, V});
}

TEST_CASE("table partials add up to the total") {
  const std::array<double, 11> ms{0.2, 0.3, 19.0, 0.1, 3.6, 43.4, 0.1, 0.1, 19.0, 0.1, 0.2};
  std::array<std::int64_t, 11> ns{};
  for (std::size_t i = 0; i < 11; ++i) ns[i] = from_ms(ms[i]);
  const auto b = assemble(bridged_trace(ns, ns[2], ns[8]));
  CHECK(b.total == doctest::Approx(86.1));
  CHECK(b.comm_up == doctest::Approx(19.0));
  CHECK(b.comm_down == doctest::Approx(19.0));
  CHECK(b.detection == doctest::Approx(43.4));
  CHECK(b.iface_plus_comm() == doctest::Approx(38.6));
  CHECK(std::abs(b.partial_sum() - b.total) < 1e-9);
}

TEST_CASE("degenerate and asymmetric traces") {
  const auto zero = assemble(bridged_trace({}, 0, 0));
  for (double v : zero.partials()) CHECK(v == 0);
  CHECK(zero.total == 0);

  // 19 ms each way with no other latency: all of it is communication
  const auto b = assemble(bridged_trace({}, 19 * kMillis, 19 * kMillis));
  CHECK(b.comm_up + b.comm_down == doctest::Approx(38.0));
  // asymmetry is not observable: the split is even
  const auto a = assemble(bridged_trace({}, 30 * kMillis, 8 * kMillis));
  CHECK(a.comm_up == 19.0);
  CHECK(a.comm_down == 19.0);
}

TEST_CASE("a cloud clock offset changes nothing") {
  const std::array<std::int64_t, 11> ns{200'001, 300'003, 0, 100'007, 3'600'011, 43'400'013, 100'017, 100'019,
                                        0, 100'023, 200'029};
  const auto base = assemble(bridged_trace(ns, 19'000'031, 18'900'037));
  for (std::int64_t off : {250 * kMillis, -3 * kSeconds, std::int64_t{7}, 1000 * kSeconds})
    CHECK(assemble(bridged_trace(ns, 19'000'031, 18'900'037, off)) == base);
}

TEST_CASE("missing probes and clock violations") {
  auto t = bridged_trace({}, kMillis, kMillis);
  auto no_det = t;
  std::erase_if(no_det.probes, [](const bus::Probe& p) { return probes::component_of(p.probe_id) == Component::Detector; });
  CHECK_THROWS_AS(assemble(no_det), MissingProbe);

  auto moved = t;
  for (auto& p : moved.probes)
    if (probes::component_of(p.probe_id) == Component::Detector) p.clock = V;
  CHECK_THROWS_AS(assemble(moved), ClockViolation);

  bus::TracingBlock iv{1,
                       {{probes::probe_id(Component::Source, Edge::Out), 0, V},
                        {probes::probe_id(Component::Source, Edge::In), 0, V},
                        {probes::probe_id(Component::Detector, Edge::In), 3'500'000, V},
                        {probes::probe_id(Component::Detector, Edge::Out), 75'700'000, V},
                        {probes::probe_id(Component::Sink, Edge::In), 75'900'000, V}}};
  const auto b = assemble_breakdown(records_from_trace(iv), Topology::InVehicle);
  CHECK(b.total == doctest::Approx(75.9));
  CHECK(b.detection == doctest::Approx(72.2));
  CHECK(b.cloud_prop_to_det == doctest::Approx(3.5));
  CHECK(b.veh_prop_to_sink == doctest::Approx(0.2));
}

TEST_CASE("scenario validation") {
  ScenarioConfig c;
  CHECK_NOTHROW(c.validate());
  c.rate_hz = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.size_ratio = 1.5;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.tls = true;
  c.simulated = true;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("presets resolve and accept overrides") {
  for (const auto& name : preset_names()) {
    const auto p = make_preset(name);
    CHECK(!p.runs.empty());
    for (const auto& r : p.runs) CHECK_NOTHROW(r.config.validate());
  }
  CHECK_THROWS_AS(make_preset("nope"), ValidationError);

  auto p = make_preset("qos-sweep");
  apply_override(p, "sample_count=20");
  apply_override(p, "mode=sim");
  for (const auto& r : p.runs) {
    CHECK(r.config.sample_count == 20);
    CHECK(r.config.simulated);
  }
  CHECK_THROWS_AS(apply_override(p, "rate_hz=abc"), ParseError);
  CHECK_THROWS_AS(apply_override(p, "colour=red"), ParseError);
  CHECK_THROWS_AS(apply_override(p, "noequals"), ParseError);
  CHECK_THROWS_AS(apply_override(p, "rate_hz=-1"), ValidationError);
  apply_seed(p, 77);
  for (const auto& r : p.runs) {
    CHECK(r.config.seed == 77);
    CHECK(r.config.shaper.seed == 77);
  }
}

TEST_CASE("samples CSV round-trips and gives the same summary") {
  std::vector<LatencyBreakdown> v;
  for (int i = 0; i < 20; ++i) {
    LatencyBreakdown b;
    b.sample_id = i + 1;
    for (std::size_t k = 0; k < kPartialCount; ++k) set_partial(b, k, 0.1 * i + k / 3.0);
    b.total = b.partial_sum();
    v.push_back(b);
  }
  const auto back = parse_samples_csv(samples_csv(v));
  CHECK(back == v);
  CHECK(summary_json(back).dump() == summary_json(v).dump());
  CHECK(ecdf_csv(v).rfind("value_ms,fraction\n", 0) == 0);
  CHECK_THROWS_AS(parse_samples_csv("sample_id,total\n1,2\n"), ParseError);
  CHECK_THROWS_AS(read_samples_csv("/nonexistent/missing.csv"), ValidationError);
}

TEST_CASE("backlog saturation rule") {
  CHECK(backlog_saturated({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}));
  CHECK(backlog_saturated({1, 2, 3, 4, 5, 5, 6, 7, 8, 9}));
  CHECK(!backlog_saturated({1, 2, 1, 2, 1, 2, 1, 2, 1, 2}));
  CHECK(!backlog_saturated({0, 0, 0, 0}));
  CHECK(!backlog_saturated({}));
}

TEST_CASE("simulated runs replay byte for byte") {
  const auto cfg = small_sim("paper-bridged", 30);
  const auto a = run_scenario(cfg);
  const auto b = run_scenario(cfg);
  CHECK(a.samples.size() == 30);
  CHECK(a.missing == 0);
  CHECK(report_json(a).dump() == report_json(b).dump());
  CHECK(samples_csv(a.samples) == samples_csv(b.samples));
  for (const auto& s : a.samples) CHECK(std::abs(s.partial_sum() - s.total) <= 1.0);
  const auto m = summarize(report_series(a.samples).back().second).mean;
  CHECK(m > 77.5);
  CHECK(m < 94.7);
}

TEST_CASE("comm-only link measures the configured one-way delay") {
  const auto r = run_scenario(small_sim("comm-only", 100));
  std::vector<double> one_way;
  for (const auto& s : r.samples) one_way.push_back(s.iface_plus_comm() / 2);
  CHECK(summarize(one_way).mean == doctest::Approx(13.6).epsilon(0.05));
}

TEST_CASE("unlimited link does not saturate") {
  auto cfg = small_sim("throughput-sweep", 1);
  cfg.shaper.bandwidth_cap = 0;
  const auto rep = sweep_throughput(cfg, {20, 40, 70}, 5);
  CHECK(!rep.saturation_hz);
  for (const auto& p : rep.points) CHECK(!p.saturated);
}
