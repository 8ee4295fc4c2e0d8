#include "edgebench/harness/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <thread>

#include "edgebench/bridge/bridge.hpp"
#include "edgebench/broker/broker.hpp"
#include "edgebench/bus/probes.hpp"
#include "edgebench/config_error.hpp"
#include "edgebench/harness/pipeline.hpp"
#include "edgebench/runtime/asio_runtime.hpp"
#include "edgebench/scan/scan.hpp"

namespace edgebench::harness {

const char* to_string(Format f) { return f == Format::Compact ? "compact" : "expanded"; }

void ScenarioConfig::validate() const {
  if (!(rate_hz > 0) || !std::isfinite(rate_hz)) throw ValidationError("rate_hz must be positive");
  if (!(size_ratio >= 0 && size_ratio <= 1)) throw ValidationError("size_ratio must lie in [0,1]");
  if (sample_count == 0) throw ValidationError("sample_count must be at least 1");
  if (cloud_detector_delay_ms < 0 || vehicle_detector_delay_ms < 0)
    throw ValidationError("detector delays must be non-negative");
  if (!(drain_timeout_s > 0)) throw ValidationError("drain_timeout_s must be positive");
  if (tls && simulated) throw ValidationError("tls needs real-time mode");
  if (tls && topology == Topology::InVehicle) throw ValidationError("tls has no effect on the in-vehicle topology");
  try {
    shaper.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string("shaper: ") + e.what());
  }
}

namespace {

using probes::kCloudClock;
using probes::kVehicleClock;

constexpr const char* kScanTopic = "/scan";
constexpr const char* kPointsTopic = "/points";
constexpr const char* kObjectsTopic = "/objects";
constexpr const char* kMqttScan = "edge/scan";
constexpr const char* kMqttObjects = "edge/objects";
constexpr Nanos kSettle = 300 * kMillis;

struct Payload {
  SharedBytes bytes;
  std::string tag;
};

Payload make_payload(const ScenarioConfig& cfg) {
  auto scan = scan::downsample(scan::reference_scan(cfg.seed), cfg.size_ratio, cfg.seed);
  if (cfg.format == Format::Expanded)
    return {share(scan::serialize(scan::expand(scan, scan::Calibration::vlp32c()))), kTagExpanded};
  return {share(scan::serialize(scan)), kTagCompact};
}

struct Stages {
  std::shared_ptr<Source> source;
  std::shared_ptr<Sink> sink;
  std::shared_ptr<Converter> converter;
  std::shared_ptr<Detector> detector;

  void start() {
    if (converter) converter->start();
    if (detector) detector->start();
    sink->start();
  }
  void stop() {
    if (source) source->stop();
    if (converter) converter->stop();
    if (detector) detector->stop();
    if (sink) sink->stop();
  }
};

/// Processing chain from `in` on `bus` to kObjectsTopic.
void build_processing(Stages& st, const ScenarioConfig& cfg, const Payload& payload,
                      std::shared_ptr<bus::LocalBus> bus, std::shared_ptr<Executor> exec, std::uint8_t clock,
                      double delay_ms) {
  scan::DetectConfig dc;
  dc.fixed_compute_delay_ms = delay_ms;
  std::string det_in = kScanTopic;
  if (!cfg.loop_through && payload.tag == kTagCompact) {
    st.converter = Converter::create(bus, exec, kScanTopic, kPointsTopic, clock);
    det_in = kPointsTopic;
  }
  st.detector = Detector::create(bus, exec, det_in, kObjectsTopic, clock, dc, cfg.loop_through);
}

bridge::BridgeConfig vehicle_bridge_config(const ScenarioConfig& cfg) {
  bridge::BridgeConfig b;
  b.client_id = "vehicle";
  b.bus2mqtt.push_back({kScanTopic, kMqttScan, cfg.qos, true, "raw"});
  b.mqtt2bus.push_back({kMqttObjects, kObjectsTopic, cfg.qos, true, "raw"});
  return b;
}

bridge::BridgeConfig cloud_bridge_config(const ScenarioConfig& cfg) {
  bridge::BridgeConfig b;
  b.client_id = "cloud";
  b.mqtt2bus.push_back({kMqttScan, kScanTopic, cfg.qos, true, "raw"});
  b.bus2mqtt.push_back({kObjectsTopic, kMqttObjects, cfg.qos, true, "raw"});
  return b;
}

client::ClientOptions client_options(const std::string& id, const ScenarioConfig& cfg, const std::string& ca_pem) {
  client::ClientOptions o;
  o.client_id = id;
  o.broker_host = "127.0.0.1";
  // Large enough that the bridge never sheds load while reconnecting.
  o.outbound_buffer_limit = std::max<std::size_t>(100, cfg.sample_count);
  if (cfg.tls) {
    o.tls = true;
    o.tls_ca_pem = ca_pem;
    o.username = id;
    o.password = id + "-secret";
  }
  return o;
}

bridge::BridgeOptions bridge_options(const ScenarioConfig& cfg, std::uint8_t clock) {
  bridge::BridgeOptions o;
  o.clock_id = clock;
  o.single_sample = cfg.single_sample_mode;
  // The vehicle bus must hold every sample queued behind a saturated link.
  o.bus_queue_size = std::max<std::size_t>(100, cfg.sample_count);
  return o;
}

broker::BrokerOptions broker_options(const ScenarioConfig& cfg) {
  broker::BrokerOptions o;
  if (cfg.shaper.active()) o.shapers["vehicle"] = cfg.shaper;
  if (cfg.tls) {
    o.credentials.add_user("vehicle", "vehicle-secret");
    o.credentials.add_user("cloud", "cloud-secret");
  }
  o.offline_queue_limit = std::max<std::size_t>(1000, cfg.sample_count);
  return o;
}

Nanos run_length(const ScenarioConfig& cfg) {
  return static_cast<Nanos>(static_cast<double>(cfg.sample_count) / cfg.rate_hz * 1e9);
}

RawRun collect_sim(const ScenarioConfig& cfg, const RunHooks& hooks, const Payload& payload) {
  SimWorld world;
  SimNetwork net(world);
  RawRun out;
  out.payload_bytes = payload.bytes->size();
  Stages st;
  {
    auto vapp = world.make_executor("vehicle-app");
    auto vbus = bus::LocalBus::create();
    std::shared_ptr<broker::Broker> brk;
    std::shared_ptr<client::Client> vcl, ccl;
    std::shared_ptr<bridge::Bridge> vbr, cbr;

    if (cfg.topology == Topology::InVehicle) {
      auto vdet = world.make_executor("vehicle-detector");
      build_processing(st, cfg, payload, vbus, vdet, kVehicleClock, cfg.vehicle_detector_delay_ms);
    } else {
      auto bexec = world.make_executor("broker");
      auto vbex = world.make_executor("vehicle-bridge");
      auto cbex = world.make_executor("cloud-bridge", cfg.cloud_clock_offset);
      auto capp = world.make_executor("cloud-app", cfg.cloud_clock_offset);
      auto cbus = bus::LocalBus::create();
      brk = broker::Broker::create(bexec, broker_options(cfg));
      net.listen("broker", bexec, brk->acceptor());
      vcl = client::Client::create(vbex, net.dialer("broker"), client_options("vehicle", cfg, {}));
      ccl = client::Client::create(cbex, net.dialer("broker"), client_options("cloud", cfg, {}));
      int connected = 0;
      bool failed = false;
      auto on_conn = [&](client::ClientError e) {
        if (e == client::ClientError::None)
          ++connected;
        else
          failed = true;
      };
      vcl->connect(on_conn);
      ccl->connect(on_conn);
      world.run_until([&] { return connected == 2 || failed; }, world.now() + 10 * kSeconds);
      if (connected != 2 || failed) throw ScenarioAborted("broker unreachable");
      vbr = bridge::Bridge::create(vbus, vcl, vehicle_bridge_config(cfg), bridge_options(cfg, kVehicleClock));
      cbr = bridge::Bridge::create(cbus, ccl, cloud_bridge_config(cfg), bridge_options(cfg, kCloudClock));
      vbr->start();
      cbr->start();
      build_processing(st, cfg, payload, cbus, capp, kCloudClock, cfg.cloud_detector_delay_ms);
    }
    st.sink = Sink::create(vbus, vapp, kObjectsTopic, kVehicleClock);
    st.source = Source::create(vbus, vapp, kScanTopic, payload.tag, payload.bytes, cfg.rate_hz, cfg.sample_count,
                               kVehicleClock);
    st.start();
    world.run_until(world.now() + kSettle);

    const Nanos t0 = world.now();
    st.source->start(vapp->now());
    if (hooks.window > 0) {
      const Nanos end = t0 + run_length(cfg);
      for (Nanos t = t0 + hooks.window; t <= end; t += hooks.window)
        world.schedule(t, [&out, &st] {
          out.backlog.push_back(static_cast<long>(st.source->published()) - static_cast<long>(st.sink->received()));
        });
    }
    const Nanos deadline = t0 + run_length(cfg) + static_cast<Nanos>(cfg.drain_timeout_s * 1e9);
    world.run_until([&] { return st.sink->received() >= cfg.sample_count; }, deadline);
    // Let pending backlog samples fire for runs that finished early.
    if (hooks.window > 0) world.run_until(std::min(deadline, t0 + run_length(cfg)));
    out.published = st.source->published();
    out.traces = st.sink->traces();
    st.stop();
    if (vbr) vbr->stop();
    if (cbr) cbr->stop();
    if (vcl) vcl->disconnect();
    if (ccl) ccl->disconnect();
    world.run_until(world.now() + 10 * kMillis);
  }
  return out;
}

template <typename T>
T wait_for(std::future<T>& f, std::chrono::milliseconds d, const char* what) {
  if (f.wait_for(d) != std::future_status::ready) throw ScenarioAborted(what);
  return f.get();
}

RawRun collect_real(const ScenarioConfig& cfg, const RunHooks& hooks, const Payload& payload) {
  RawRun out;
  out.payload_bytes = payload.bytes->size();
  std::vector<std::shared_ptr<Executor>> execs;
  auto make = [&](const char* name, Nanos off = 0) {
    execs.push_back(make_realtime_executor(name, off));
    return execs.back();
  };
  auto vapp = make("vehicle-app");
  auto vbus = bus::LocalBus::create();
  Stages st;
  std::shared_ptr<broker::Broker> brk;
  std::unique_ptr<TcpListener> listener;
  std::shared_ptr<client::Client> vcl, ccl;
  std::shared_ptr<bridge::Bridge> vbr, cbr;

  auto teardown = [&] {
    st.stop();
    if (vbr) vbr->stop();
    if (cbr) cbr->stop();
    if (vcl) vcl->disconnect();
    if (ccl) ccl->disconnect();
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    if (listener) listener->close();
    for (auto& e : execs) stop_realtime_executor(*e);
  };

  try {
    if (cfg.topology == Topology::InVehicle) {
      build_processing(st, cfg, payload, vbus, make("vehicle-detector"), kVehicleClock, cfg.vehicle_detector_delay_ms);
    } else {
      auto bexec = make("broker");
      auto vbex = make("vehicle-bridge");
      auto cbex = make("cloud-bridge", cfg.cloud_clock_offset);
      auto capp = make("cloud-app", cfg.cloud_clock_offset);
      auto cbus = bus::LocalBus::create();
      brk = broker::Broker::create(bexec, broker_options(cfg));
      std::optional<TlsIdentity> id;
      if (cfg.tls) id = generate_self_signed("localhost");
      // The accept handler must run on the broker's loop, which listen_tcp guarantees.
      listener = listen_tcp(bexec, "127.0.0.1", 0, id, brk->acceptor());
      const std::string ca = id ? id->cert_pem : "";
      const TlsClientOptions tls{cfg.tls, ca};
      auto vopt = client_options("vehicle", cfg, ca);
      auto copt = client_options("cloud", cfg, ca);
      vopt.broker_port = copt.broker_port = listener->port();
      vcl = client::Client::create(vbex, tcp_dialer("127.0.0.1", listener->port(), tls), vopt);
      ccl = client::Client::create(cbex, tcp_dialer("127.0.0.1", listener->port(), tls), copt);
      std::promise<client::ClientError> pv, pc;
      auto fv = pv.get_future(), fc = pc.get_future();
      vcl->connect([&pv](client::ClientError e) { pv.set_value(e); });
      ccl->connect([&pc](client::ClientError e) { pc.set_value(e); });
      const auto ev = wait_for(fv, std::chrono::seconds(10), "broker unreachable (vehicle)");
      const auto ec = wait_for(fc, std::chrono::seconds(10), "broker unreachable (cloud)");
      if (ev != client::ClientError::None || ec != client::ClientError::None)
        throw ScenarioAborted(std::string("connect failed: ") + client::to_string(ev) + "/" + client::to_string(ec));
      vbr = bridge::Bridge::create(vbus, vcl, vehicle_bridge_config(cfg), bridge_options(cfg, kVehicleClock));
      cbr = bridge::Bridge::create(cbus, ccl, cloud_bridge_config(cfg), bridge_options(cfg, kCloudClock));
      vbr->start();
      cbr->start();
      build_processing(st, cfg, payload, cbus, capp, kCloudClock, cfg.cloud_detector_delay_ms);
    }
    st.sink = Sink::create(vbus, vapp, kObjectsTopic, kVehicleClock);
    st.source = Source::create(vbus, vapp, kScanTopic, payload.tag, payload.bytes, cfg.rate_hz, cfg.sample_count,
                               kVehicleClock);
    st.start();
    // Subscriptions cross the shaped link; give them time to settle.
    std::this_thread::sleep_for(std::chrono::nanoseconds(kSettle + 2 * from_ms(cfg.shaper.one_way_delay_ms)));

    const Nanos t0 = monotonic_now();
    st.source->start(vapp->now() + 5 * kMillis);
    const Nanos end = t0 + run_length(cfg);
    const Nanos deadline = end + static_cast<Nanos>(cfg.drain_timeout_s * 1e9);
    Nanos next_window = hooks.window > 0 ? t0 + hooks.window : 0;
    while (monotonic_now() < deadline) {
      if (hooks.window > 0 && monotonic_now() >= next_window && next_window <= end) {
        out.backlog.push_back(static_cast<long>(st.source->published()) - static_cast<long>(st.sink->received()));
        next_window += hooks.window;
      }
      if (st.sink->received() >= cfg.sample_count && (hooks.window == 0 || next_window > end)) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    out.published = st.source->published();
    out.traces = st.sink->traces();
  } catch (...) {
    teardown();
    throw;
  }
  teardown();
  return out;
}

}  // namespace

RawRun collect_traces(const ScenarioConfig& cfg, const RunHooks& hooks) {
  cfg.validate();
  const Payload payload = make_payload(cfg);
  return cfg.simulated ? collect_sim(cfg, hooks, payload) : collect_real(cfg, hooks, payload);
}

Report analyze(const ScenarioConfig& cfg, const RawRun& run, bool tolerate_missing) {
  Report r;
  r.config = cfg;
  r.published = run.published;
  r.payload_bytes = run.payload_bytes;
  r.notes = standard_notes(cfg);
  std::map<std::uint64_t, LatencyBreakdown> by_id;
  for (const auto& t : run.traces) {
    try {
      auto b = assemble_breakdown(records_from_trace(t), cfg.topology);
      by_id.emplace(b.sample_id, b);
    } catch (const MissingProbe&) {
    } catch (const std::invalid_argument&) {
    }
  }
  for (auto& [id, b] : by_id) r.samples.push_back(b);
  r.missing = r.published > r.samples.size() ? r.published - r.samples.size() : 0;
  if (r.published < cfg.sample_count) r.missing += cfg.sample_count - r.published;
  if (!tolerate_missing && static_cast<double>(r.missing) > 0.01 * static_cast<double>(cfg.sample_count))
    throw ScenarioAborted(std::to_string(r.missing) + " of " + std::to_string(cfg.sample_count) +
                          " samples missing probes (limit 1%)");
  if (r.samples.empty() && !tolerate_missing) throw ScenarioAborted("no complete samples");
  return r;
}

Report run_scenario(const ScenarioConfig& cfg) { return analyze(cfg, collect_traces(cfg)); }

std::vector<std::pair<std::string, std::vector<double>>> report_series(const std::vector<LatencyBreakdown>& samples) {
  std::vector<std::pair<std::string, std::vector<double>>> out;
  const auto& names = partial_names();
  for (std::size_t i = 0; i < kPartialCount; ++i) {
    std::vector<double> v;
    v.reserve(samples.size());
    for (const auto& s : samples) v.push_back(s.partials()[i]);
    out.emplace_back(names[i], std::move(v));
  }
  std::vector<double> ipc, tot;
  for (const auto& s : samples) {
    ipc.push_back(s.iface_plus_comm());
    tot.push_back(s.total);
  }
  out.emplace_back("iface_plus_comm", std::move(ipc));
  out.emplace_back("total", std::move(tot));
  return out;
}

std::vector<std::string> standard_notes(const ScenarioConfig& cfg) {
  std::vector<std::string> n = {
      "communication latency is total minus same-clock partials, split evenly between up and down",
      "reference scan reconstructed as 150 packets of 1206 bytes with 49016 valid returns",
      "expanded point layout assumed to be 22 bytes (xyz, intensity as float32; ring u16; time offset float32)",
      "bridge queueing: one FIFO per direction; bus queues drop the oldest message on overflow",
      "MQTT keep-alive 60 s, retransmit after 1 s doubling, at most 3 retransmissions (our defaults)",
      "link jitter: Gaussian added to the one-way delay and clamped at zero",
      "QoS 2 messages are routed by the broker on PUBREL and delivered by clients on PUBLISH",
  };
  if (cfg.simulated)
    n.push_back("simulated time: link 30 us + bytes/2 GB/s, bridge 5 us + bytes/2 GB/s, bus hop 20 us, "
                "conversion 60 ns/point, clustering 20 ns/point");
  return n;
}

}  // namespace edgebench::harness
