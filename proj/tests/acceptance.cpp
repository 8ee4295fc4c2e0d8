// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion names
// (e.g. AC3 AC7) as arguments to run a subset.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "edgebench/harness/presets.hpp"
#include "edgebench/harness/report_io.hpp"
#include "edgebench/harness/sweep.hpp"
#include "edgebench/scan/scan.hpp"
#include "packet_gen.hpp"
#include "sim_rig.hpp"
#include "stats_oracle.hpp"

using namespace edgebench;
using namespace edgebench::harness;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double mean_of(const std::vector<LatencyBreakdown>& s, const std::function<double(const LatencyBreakdown&)>& f) {
  std::vector<double> v;
  for (const auto& b : s) v.push_back(f(b));
  return summarize(v).mean;
}

double total_of(const LatencyBreakdown& b) { return b.total; }
double comm_of(const LatencyBreakdown& b) { return b.comm_up + b.comm_down; }
double iface_of(const LatencyBreakdown& b) {
  return b.veh_iface + b.cloud_iface_in + b.cloud_iface_out + b.veh_iface_in;
}

std::vector<PresetRun> preset_runs(const std::string& name, bool simulated) {
  auto p = make_preset(name);
  for (auto& r : p.runs) r.config.simulated = simulated;
  return p.runs;
}

Outcome ac1_identity() {
  auto cfg = make_preset("paper-bridged").runs.at(0).config;
  cfg.name = "loopback";
  cfg.shaper = {};
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_scenario(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double worst = 0;
  for (const auto& s : r.samples) worst = std::max(worst, std::abs(s.partial_sum() - s.total));
  const bool ok = r.samples.size() == 600 && worst <= 1.0 && secs < 90;
  return {ok, fmt("%zu samples, max |sum - total| = %.6f ms, runtime %.1f s", r.samples.size(), worst, secs)};
}

Outcome ac2_offset() {
  auto cfg = make_preset("paper-bridged").runs.at(0).config;
  cfg.simulated = true;
  const auto raw = collect_traces(cfg);
  auto shifted = raw;
  for (auto& t : shifted.traces)
    for (auto& p : t.probes)
      if (p.clock == probes::kCloudClock) p.t += 250 * kMillis;
  const auto a = analyze(cfg, raw);
  const auto b = analyze(cfg, shifted);
  const bool same = report_json(a).dump() == report_json(b).dump() && samples_csv(a.samples) == samples_csv(b.samples) &&
                    ecdf_csv(a.samples) == ecdf_csv(b.samples) && a.samples == b.samples;
  return {same && a.samples.size() == 600, fmt("%zu samples, reports %s", a.samples.size(), same ? "identical" : "differ")};
}

Outcome ac3_paper_bridged() {
  const auto r = run_scenario(make_preset("paper-bridged").runs.at(0).config);
  std::vector<double> totals;
  for (const auto& s : r.samples) totals.push_back(s.total);
  const double m = summarize(totals).mean;
  const double below = fraction_below(totals, 110.0);
  return {m >= 77.5 && m <= 94.7 && below >= 0.99,
          fmt("mean total %.2f ms, %.2f%% below 110 ms, %.2f%% below 100 ms", m, 100 * below,
              100 * fraction_below(totals, 100.0))};
}

Outcome ac4_in_vehicle() {
  const auto r = run_scenario(make_preset("in-vehicle").runs.at(0).config);
  const double m = mean_of(r.samples, total_of);
  return {m >= 72 && m <= 80, fmt("mean total %.2f ms", m)};
}

Outcome ac5_qos() {
  std::vector<double> sums;
  for (const auto& run : preset_runs("qos-sweep", false)) {
    const auto r = run_scenario(run.config);
    sums.push_back(mean_of(r.samples, [](const LatencyBreakdown& b) { return b.iface_plus_comm(); }));
  }
  const double r1 = sums[1] / sums[0], r2 = sums[2] / sums[0];
  return {r1 >= 1.0 && r1 <= 1.3 && r2 >= 2.0 && r2 <= 2.6,
          fmt("interfaces+comm %.2f / %.2f / %.2f ms, QoS1/QoS0 %.4f, QoS2/QoS0 %.4f", sums[0], sums[1], sums[2], r1,
              r2)};
}

// Frame filter that duplicates and drops frames of selected packet types.
FrameFilter adversary(std::shared_ptr<std::mt19937_64> rng, std::set<std::uint8_t> types, double dup, double drop,
                      std::function<void(const mqtt::ControlPacket&)> observe = {}) {
  return [=](SharedBytes f) -> std::vector<SharedBytes> {
    const auto d = mqtt::decode_packet(*f);
    if (!d.ok()) return {f};
    if (observe) observe(d.packet);
    if (!types.count(mqtt::packet_type(d.packet))) return {f};
    std::uniform_real_distribution<double> u(0, 1);
    const double x = u(*rng);
    if (x < drop) return {};
    if (x < drop + dup) return {f, f};
    return {f};
  };
}

constexpr std::uint8_t kPublish = 3, kPuback = 4, kPubrec = 5, kPubrel = 6, kPubcomp = 7;

struct Tally {
  std::map<std::uint32_t, int> got;
  std::size_t total = 0;
};

std::pair<bool, std::string> exactly_once_qos2(std::size_t n) {
  broker::BrokerOptions bo;
  bo.max_retransmits = 20;
  testrig::SimRig rig(std::move(bo));
  auto rng = std::make_shared<std::mt19937_64>(42);
  rig.net.set_filter("pub", true, adversary(rng, {kPublish, kPubrel}, 0.10, 0.03));
  rig.net.set_filter("pub", false, adversary(rng, {kPubrec, kPubcomp}, 0.05, 0.03));
  rig.net.set_filter("sub", false, adversary(rng, {kPublish, kPubrel}, 0.10, 0.03));
  rig.net.set_filter("sub", true, adversary(rng, {kPubrec, kPubcomp}, 0.05, 0.03));
  auto make = [&](const std::string& id) {
    auto o = rig.options(id);
    o.max_retransmits = 20;
    auto c = rig.make(o);
    if (rig.connect(c) != client::ClientError::None) throw std::runtime_error("connect failed");
    return c;
  };
  auto pub = make("pub");
  auto sub = make("sub");
  Tally t;
  rig.subscribe(sub, "eo", mqtt::QoS::ExactlyOnce, [&](const mqtt::Publish& p) {
    ++t.got[get_le32(p.payload.data())];
    ++t.total;
  });
  std::size_t completed = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    Bytes b;
    put_le32(b, i);
    pub->publish("eo", b, mqtt::QoS::ExactlyOnce, [&](client::ClientError e) { completed += e == client::ClientError::None; });
    rig.world.run_until(rig.world.now() + kMillis);
  }
  rig.world.run_until([&] { return completed == n && t.total >= n; }, rig.world.now() + 600 * kSeconds);
  rig.settle(30 * kSeconds);
  std::size_t once = 0, multi = 0;
  for (auto& [k, c] : t.got) (c == 1 ? once : multi)++;
  const bool ok = once == n && multi == 0 && t.total == n;
  return {ok, fmt("QoS 2: %zu/%zu delivered exactly once, %zu more than once, %zu publisher retransmits", once, n, multi,
                  std::size_t(pub->stats().retransmits.load()))};
}

std::pair<bool, std::string> at_least_once_qos1(std::size_t n) {
  testrig::SimRig rig;
  auto rng = std::make_shared<std::mt19937_64>(7);
  // publisher->broker frames: any repeat of a packet must carry dup=1
  std::map<std::uint32_t, int> seen;
  std::size_t repeats = 0, unflagged = 0;
  rig.net.set_filter("pub", true, adversary(rng, {}, 0, 0, [&](const mqtt::ControlPacket& pkt) {
                       auto* p = std::get_if<mqtt::Publish>(&pkt);
                       if (!p) return;
                       if (seen[get_le32(p->payload.data())]++ > 0) {
                         ++repeats;
                         if (!p->dup) ++unflagged;
                       }
                     }));
  rig.net.set_filter("pub", false, adversary(rng, {kPuback}, 0, 0.20));
  auto o = rig.options("pub");
  o.max_retransmits = 20;
  auto pub = rig.make(o);
  if (rig.connect(pub) != client::ClientError::None) throw std::runtime_error("connect failed");
  auto sub = rig.connected("sub");
  Tally t;
  rig.subscribe(sub, "alo", mqtt::QoS::AtLeastOnce, [&](const mqtt::Publish& p) {
    ++t.got[get_le32(p.payload.data())];
    ++t.total;
  });
  std::size_t completed = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    Bytes b;
    put_le32(b, i);
    pub->publish("alo", b, mqtt::QoS::AtLeastOnce, [&](client::ClientError e) { completed += e == client::ClientError::None; });
    rig.world.run_until(rig.world.now() + kMillis);
  }
  rig.world.run_until([&] { return completed == n; }, rig.world.now() + 600 * kSeconds);
  rig.settle(10 * kSeconds);
  const std::size_t missing = n - t.got.size();
  const bool ok = missing == 0 && repeats > 0 && unflagged == 0 && completed == n;
  return {ok, fmt("QoS 1: %zu missing, %zu redelivered, %zu retransmissions (%zu without dup)", missing,
                  t.total - t.got.size(), repeats, unflagged)};
}

Outcome ac6_exactly_once() {
  const auto [ok2, d2] = exactly_once_qos2(10'000);
  const auto [ok1, d1] = at_least_once_qos1(10'000);
  return {ok1 && ok2, d2 + "; " + d1};
}

Outcome ac7_sizes() {
  const auto s = scan::reference_scan();
  const auto c = scan::expand(s, scan::Calibration::vlp32c());
  const auto compact = scan::serialize(s).size();
  const auto expanded = scan::serialize(c).size();
  const double ratio = double(expanded) / compact;
  const bool ok = compact == 1206 * 150 + 16 && expanded == 22 * 49016 + 16 && ratio >= 5.8 && ratio <= 6.2;
  return {ok, fmt("compact %zu B, expanded %zu B, ratio %.4f", compact, expanded, ratio)};
}

Outcome ac8_size_sweep() {
  std::vector<double> comm;
  std::string detail = "comm by size:";
  for (const auto& run : preset_runs("size-sweep", true)) {
    comm.push_back(mean_of(run_scenario(run.config).samples, comm_of));
    detail += fmt(" %s=%.2f", run.label.c_str(), comm.back());
  }
  bool mono = true;
  for (std::size_t i = 1; i < comm.size(); ++i) mono = mono && comm[i] >= comm[i - 1];
  std::vector<double> fmt_comm;
  for (const auto& run : preset_runs("format-compare", true))
    fmt_comm.push_back(mean_of(run_scenario(run.config).samples, comm_of));
  detail += fmt("; compact %.2f, expanded %.2f ms", fmt_comm[0], fmt_comm[1]);
  return {mono && fmt_comm[1] > fmt_comm[0], detail};
}

Outcome ac9_saturation() {
  const auto p = make_preset("throughput-sweep");
  auto base = p.runs.at(0).config;
  base.simulated = true;
  const auto rep = sweep_throughput(base, p.sweep_rates, p.sweep_windows);
  if (!rep.saturation_hz) return {false, "no saturation detected"};
  const double sat = *rep.saturation_hz;
  std::string detail = fmt("saturation at %.0f Hz", sat);
  bool flat = false;
  if (rep.below_saturation) {
    flat = rep.below_saturation->p_value > 0.05;
    detail += fmt(", slope %.4f ms/Hz (p = %.3f) over %zu rates below", rep.below_saturation->slope,
                  rep.below_saturation->p_value, rep.below_saturation->n);
  } else {
    detail += ", too few rates below saturation for a slope test";
  }
  return {sat >= 50 && sat <= 61 && flat, detail};
}

Outcome ac10_stats() {
  std::mt19937_64 rng(10);
  std::size_t bad = 0;
  std::string first;
  for (int i = 0; i < 1000; ++i) {
    const auto v = oracle::random_series(rng);
    const auto why = oracle::compare(v);
    if (!why.empty() && bad++ == 0) first = why;
  }
  return {bad == 0, fmt("%zu/1000 series disagree%s%s", bad, first.empty() ? "" : ", first: ", first.c_str())};
}

Outcome ac11_codec() {
  std::mt19937_64 rng(11);
  std::size_t rt_fail = 0, prefix_fail = 0, crashes = 0, accepted = 0;
  for (int i = 0; i < 100'000; ++i) {
    const auto pkt = testgen::random_packet(rng);
    const auto frame = mqtt::encode_packet(pkt);
    const auto r = mqtt::decode_packet(frame);
    if (!r.ok() || r.consumed != frame.size() || !(r.packet == pkt)) ++rt_fail;
    for (std::size_t k = 0; k < frame.size(); ++k)
      if (mqtt::decode_packet(ByteView(frame).first(k)).status != mqtt::DecodeStatus::NeedMoreData) ++prefix_fail;
  }
  for (int i = 0; i < 100'000; ++i) {
    Bytes b(rng() % 64);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    // plausible first bytes make it past the header more often
    if (!b.empty() && rng() % 2) b[0] = static_cast<std::uint8_t>((1 + rng() % 14) << 4 | (rng() % 16));
    try {
      const auto r = mqtt::decode_packet(b);
      if (!r.ok()) continue;
      ++accepted;
      if (r.consumed > b.size()) ++prefix_fail;
      for (std::size_t k = 0; k < r.consumed; ++k)
        if (mqtt::decode_packet(ByteView(b).first(k)).ok()) ++prefix_fail;
    } catch (...) {
      ++crashes;
    }
  }
  return {rt_fail == 0 && prefix_fail == 0 && crashes == 0,
          fmt("100000 packets: %zu round-trip failures; 100000 random strings: %zu exceptions, %zu decoded frames; "
              "%zu prefixes parsed as complete",
              rt_fail, crashes, accepted, prefix_fail)};
}

Outcome ac12_tls() {
  std::vector<double> iface;
  std::size_t complete = 0;
  for (const auto& run : preset_runs("tls-compare", false)) {
    const auto r = run_scenario(run.config);
    complete += r.samples.size();
    iface.push_back(mean_of(r.samples, iface_of));
  }
  const double inc = iface[1] - iface[0];
  return {inc < 5.0 && complete == 400,
          fmt("interfaces %.3f ms plain, %.3f ms TLS (+%.3f ms), %zu/400 samples", iface[0], iface[1], inc, complete)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> all = {
      {"AC1 decomposition identity", ac1_identity},
      {"AC2 clock-offset immunity", ac2_offset},
      {"AC3 bridged totals", ac3_paper_bridged},
      {"AC4 in-vehicle baseline", ac4_in_vehicle},
      {"AC5 QoS ratios", ac5_qos},
      {"AC6 delivery guarantees", ac6_exactly_once},
      {"AC7 size/format model", ac7_sizes},
      {"AC8 size and format monotonicity", ac8_size_sweep},
      {"AC9 saturation", ac9_saturation},
      {"AC10 statistics oracle", ac10_stats},
      {"AC11 codec fuzz", ac11_codec},
      {"AC12 TLS overhead", ac12_tls},
  };
  // Usage: acceptance [--known-fail=ID]... [ID]...
  // A known failure still prints FAIL but does not change the exit status.
  std::set<std::string> only, known;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a.rfind("--known-fail=", 0) == 0)
      known.insert(a.substr(13));
    else
      only.insert(a);
  }
  int failed = 0;
  for (const auto& [name, fn] : all) {
    const std::string id = name.substr(0, name.find(' '));
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass && !known.count(id);
    std::printf("%s %s: %s%s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
                !o.pass && known.count(id) ? " [known failure, not counted]" : "");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
