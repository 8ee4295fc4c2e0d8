#include "edgebench/harness/breakdown.hpp"

#include <map>
#include <optional>

#include "edgebench/runtime/executor.hpp"

namespace edgebench::harness {

using probes::Component;
using probes::Edge;

std::vector<ProbeRecord> records_from_trace(const bus::TracingBlock& t) {
  struct Edges {
    std::optional<std::int64_t> in, out, ack;
  };
  std::vector<std::pair<Component, std::uint8_t>> order;
  std::map<std::pair<Component, std::uint8_t>, Edges> seen;
  for (const auto& p : t.probes) {
    const auto key = std::make_pair(probes::component_of(p.probe_id), p.clock);
    auto [it, fresh] = seen.try_emplace(key);
    if (fresh) order.push_back(key);
    const auto v = static_cast<std::int64_t>(p.t);
    auto& e = it->second;
    switch (probes::edge_of(p.probe_id)) {
      case Edge::In:
        if (!e.in) e.in = v;
        break;
      case Edge::Out:
        if (!e.out) e.out = v;
        break;
      case Edge::Ack:
        if (!e.ack) e.ack = v;
        break;
      default:
        throw std::invalid_argument("unknown probe edge in id " + std::to_string(p.probe_id));
    }
  }

  std::vector<ProbeRecord> out;
  for (const auto& key : order) {
    const Edges& e = seen[key];
    if (!e.in) continue;
    // The sink is a terminal point: its record spans no time.
    const bool terminal = key.first == Component::Sink;
    if (!terminal && !e.out) continue;
    ProbeRecord r{t.sample_id, key.first, *e.in, e.ack ? *e.ack : terminal ? *e.in : *e.out, key.second};
    if (r.t_out < r.t_in)
      throw std::invalid_argument("probe record of sample " + std::to_string(t.sample_id) + " ends before it starts");
    out.push_back(r);
  }
  return out;
}

const char* to_string(Topology t) { return t == Topology::InVehicle ? "in_vehicle" : "bridged"; }

std::array<double, kPartialCount> LatencyBreakdown::partials() const {
  return {veh_prop_to_iface, veh_iface,           comm_up,         cloud_iface_in, cloud_prop_to_det, detection,
          cloud_prop_to_iface, cloud_iface_out, comm_down, veh_iface_in,   veh_prop_to_sink};
}

double LatencyBreakdown::partial_sum() const {
  double s = 0;
  for (double v : partials()) s += v;
  return s;
}

double LatencyBreakdown::iface_plus_comm() const {
  return veh_iface + comm_up + cloud_iface_in + cloud_iface_out + comm_down + veh_iface_in;
}

const std::array<const char*, kPartialCount>& partial_names() {
  static const std::array<const char*, kPartialCount> names = {
      "veh_prop_to_iface",   "veh_iface",       "comm_up",   "cloud_iface_in", "cloud_prop_to_det", "detection",
      "cloud_prop_to_iface", "cloud_iface_out", "comm_down", "veh_iface_in",   "veh_prop_to_sink"};
  return names;
}

void set_partial(LatencyBreakdown& b, std::size_t i, double v) {
  double* fields[kPartialCount] = {&b.veh_prop_to_iface,   &b.veh_iface,       &b.comm_up,   &b.cloud_iface_in,
                                   &b.cloud_prop_to_det,   &b.detection,       &b.cloud_prop_to_iface,
                                   &b.cloud_iface_out,     &b.comm_down,       &b.veh_iface_in,
                                   &b.veh_prop_to_sink};
  if (i >= kPartialCount) throw std::out_of_range("partial index");
  *fields[i] = v;
}

namespace {

const char* component_name(Component c) {
  switch (c) {
    case Component::Source: return "source";
    case Component::BridgeBusToMqtt: return "bridge bus->mqtt";
    case Component::BridgeMqttToBus: return "bridge mqtt->bus";
    case Component::Detector: return "detector";
    case Component::Sink: return "sink";
    case Component::Converter: return "converter";
  }
  return "?";
}

class Finder {
 public:
  explicit Finder(const std::vector<ProbeRecord>& r) : records_(r) {}

  const ProbeRecord& need(Component c, std::uint8_t clock) const {
    const ProbeRecord* other = nullptr;
    for (const auto& r : records_) {
      if (r.component != c) continue;
      if (r.clock_id == clock) return r;
      other = &r;
    }
    const std::string where = std::string(component_name(c)) + " on clock " + std::to_string(clock);
    if (other)
      throw ClockViolation("record for " + where + " carries clock " + std::to_string(other->clock_id) +
                           "; using it would subtract across clocks");
    throw MissingProbe(records_.empty() ? 0 : records_.front().sample_id, "missing probe: " + where);
  }

 private:
  const std::vector<ProbeRecord>& records_;
};

}  // namespace

LatencyBreakdown assemble_breakdown(const std::vector<ProbeRecord>& records, Topology topo) {
  if (records.empty()) throw MissingProbe(0, "no probe records");
  const std::uint64_t sample = records.front().sample_id;
  for (const auto& r : records)
    if (r.sample_id != sample) throw std::invalid_argument("probe records of different samples");

  const std::uint8_t V = probes::kVehicleClock, C = probes::kCloudClock;
  Finder f(records);
  LatencyBreakdown b;
  b.sample_id = sample;
  std::int64_t total = 0, sum = 0;
  auto put = [&](double LatencyBreakdown::*field, std::int64_t ns) {
    b.*field = to_ms(ns);
    sum += ns;
  };

  if (topo == Topology::InVehicle) {
    const auto& src = f.need(Component::Source, V);
    const auto& det = f.need(Component::Detector, V);
    const auto& sink = f.need(Component::Sink, V);
    put(&LatencyBreakdown::cloud_prop_to_det, det.t_in - src.t_out);
    put(&LatencyBreakdown::detection, det.t_out - det.t_in);
    put(&LatencyBreakdown::veh_prop_to_sink, sink.t_in - det.t_out);
    total = sink.t_in - src.t_out;
  } else {
    const auto& src = f.need(Component::Source, V);
    const auto& vb = f.need(Component::BridgeBusToMqtt, V);
    const auto& cm = f.need(Component::BridgeMqttToBus, C);
    const auto& det = f.need(Component::Detector, C);
    const auto& cb = f.need(Component::BridgeBusToMqtt, C);
    const auto& vm = f.need(Component::BridgeMqttToBus, V);
    const auto& sink = f.need(Component::Sink, V);
    put(&LatencyBreakdown::veh_prop_to_iface, vb.t_in - src.t_out);
    put(&LatencyBreakdown::veh_iface, vb.t_out - vb.t_in);
    put(&LatencyBreakdown::cloud_iface_in, cm.t_out - cm.t_in);
    put(&LatencyBreakdown::cloud_prop_to_det, det.t_in - cm.t_out);
    put(&LatencyBreakdown::detection, det.t_out - det.t_in);
    put(&LatencyBreakdown::cloud_prop_to_iface, cb.t_in - det.t_out);
    put(&LatencyBreakdown::cloud_iface_out, cb.t_out - cb.t_in);
    put(&LatencyBreakdown::veh_iface_in, vm.t_out - vm.t_in);
    put(&LatencyBreakdown::veh_prop_to_sink, sink.t_in - vm.t_out);
    total = sink.t_in - src.t_out;
  }

  const std::int64_t comm = total - sum;
  const std::int64_t up = comm / 2;
  b.comm_up = to_ms(up);
  b.comm_down = to_ms(comm - up);
  b.total = to_ms(total);
  return b;
}

}  // namespace edgebench::harness
