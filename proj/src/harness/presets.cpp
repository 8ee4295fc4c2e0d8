#include "edgebench/harness/presets.hpp"

#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>

#include "edgebench/config_error.hpp"

namespace edgebench::harness {

namespace {

ScenarioConfig bridged(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  c.shaper.one_way_delay_ms = 19.0;
  c.shaper.jitter_stddev_ms = 1.0;
  return c;
}

ScenarioConfig comm_only(const std::string& name) {
  ScenarioConfig c = bridged(name);
  c.loop_through = true;
  c.size_ratio = 0.0;
  c.shaper.one_way_delay_ms = 13.6;
  c.shaper.jitter_stddev_ms = 1.6;
  return c;
}

Preset build(const std::string& name) {
  Preset p;
  p.name = name;
  if (name == "paper-bridged") {
    p.description = "vehicle -> shaped link -> broker -> processing host, detector 43.4 ms";
    p.runs.push_back({"", bridged(name)});
  } else if (name == "in-vehicle") {
    p.description = "all processing on the vehicle, detector 72.2 ms";
    ScenarioConfig c;
    c.name = name;
    c.topology = Topology::InVehicle;
    p.runs.push_back({"", c});
  } else if (name == "comm-only") {
    p.description = "loop-through instead of detection, empty scan, 13.6 ms link";
    p.runs.push_back({"", comm_only(name)});
  } else if (name == "qos-sweep") {
    p.description = "paper-bridged at QoS 0, 1 and 2";
    for (int q = 0; q <= 2; ++q) {
      ScenarioConfig c = bridged(name);
      c.qos = *mqtt::qos_from_int(q);
      p.runs.push_back({"qos" + std::to_string(q), c});
    }
  } else if (name == "size-sweep") {
    p.description = "loop-through over a 10 MB/s link at 0, 25, 50, 75 and 100% of the scan";
    for (int pct : {0, 25, 50, 75, 100}) {
      ScenarioConfig c = comm_only(name);
      c.shaper.bandwidth_cap = 1e7;
      c.size_ratio = pct / 100.0;
      p.runs.push_back({"size" + std::to_string(pct), c});
    }
  } else if (name == "format-compare") {
    p.description = "compact packets against the expanded cloud over a 10 MB/s link, 5 Hz";
    for (Format f : {Format::Compact, Format::Expanded}) {
      ScenarioConfig c = bridged(name);
      c.loop_through = true;
      c.shaper.bandwidth_cap = 1e7;
      // an expanded cloud every 100 ms would exceed the link
      c.rate_hz = 5;
      c.format = f;
      p.runs.push_back({to_string(f), c});
    }
  } else if (name == "tls-compare") {
    p.description = "loopback without and with TLS plus authentication";
    for (bool tls : {false, true}) {
      ScenarioConfig c;
      c.name = name;
      c.loop_through = true;
      c.sample_count = 200;
      c.tls = tls;
      p.runs.push_back({tls ? "tls" : "plain", c});
    }
  } else if (name == "throughput-sweep") {
    p.description = "loop-through, one sample in flight, 10 MB/s link, rising publish rate";
    ScenarioConfig c = comm_only(name);
    c.size_ratio = 1.0;
    c.shaper.bandwidth_cap = 1e7;
    c.single_sample_mode = true;
    p.runs.push_back({"", c});
    p.sweep_rates = {20, 30, 40, 45, 50, 52, 54, 56, 58, 60, 62, 65, 70};
  } else {
    throw ValidationError("unknown preset '" + name + "'");
  }
  return p;
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ParseError("expected a boolean, got '" + v + "'", 0);
}

double parse_double(const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || !std::isfinite(d)) throw ParseError("expected a number, got '" + v + "'", 0);
  return d;
}

std::uint64_t parse_uint(const std::string& v) {
  char* end = nullptr;
  const unsigned long long u = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || v[0] == '-' || *end != '\0') throw ParseError("expected an unsigned integer, got '" + v + "'", 0);
  return u;
}

using Setter = std::function<void(ScenarioConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> m = {
      {"mode",
       [](ScenarioConfig& c, const std::string& v) {
         if (v != "sim" && v != "real") throw ParseError("mode must be sim or real", 0);
         c.simulated = v == "sim";
       }},
      {"topology",
       [](ScenarioConfig& c, const std::string& v) {
         if (v == "bridged")
           c.topology = Topology::Bridged;
         else if (v == "in_vehicle" || v == "in-vehicle")
           c.topology = Topology::InVehicle;
         else
           throw ParseError("topology must be bridged or in_vehicle", 0);
       }},
      {"rate_hz", [](ScenarioConfig& c, const std::string& v) { c.rate_hz = parse_double(v); }},
      {"sample_count", [](ScenarioConfig& c, const std::string& v) { c.sample_count = parse_uint(v); }},
      {"qos",
       [](ScenarioConfig& c, const std::string& v) {
         auto q = mqtt::qos_from_int(static_cast<int>(parse_uint(v)));
         if (!q) throw ParseError("qos must be 0, 1 or 2", 0);
         c.qos = *q;
       }},
      {"tls", [](ScenarioConfig& c, const std::string& v) { c.tls = parse_bool(v); }},
      {"format",
       [](ScenarioConfig& c, const std::string& v) {
         if (v != "compact" && v != "expanded") throw ParseError("format must be compact or expanded", 0);
         c.format = v == "compact" ? Format::Compact : Format::Expanded;
       }},
      {"size_ratio", [](ScenarioConfig& c, const std::string& v) { c.size_ratio = parse_double(v); }},
      {"delay_ms", [](ScenarioConfig& c, const std::string& v) { c.shaper.one_way_delay_ms = parse_double(v); }},
      {"jitter_ms", [](ScenarioConfig& c, const std::string& v) { c.shaper.jitter_stddev_ms = parse_double(v); }},
      {"bandwidth", [](ScenarioConfig& c, const std::string& v) { c.shaper.bandwidth_cap = parse_double(v); }},
      {"drop", [](ScenarioConfig& c, const std::string& v) { c.shaper.drop_probability = parse_double(v); }},
      {"detector_delay_ms",
       [](ScenarioConfig& c, const std::string& v) { c.cloud_detector_delay_ms = parse_double(v); }},
      {"vehicle_detector_delay_ms",
       [](ScenarioConfig& c, const std::string& v) { c.vehicle_detector_delay_ms = parse_double(v); }},
      {"loop_through", [](ScenarioConfig& c, const std::string& v) { c.loop_through = parse_bool(v); }},
      {"single_sample", [](ScenarioConfig& c, const std::string& v) { c.single_sample_mode = parse_bool(v); }},
      {"seed",
       [](ScenarioConfig& c, const std::string& v) {
         c.seed = parse_uint(v);
         c.shaper.seed = c.seed;
       }},
      {"cloud_clock_offset_ms",
       [](ScenarioConfig& c, const std::string& v) { c.cloud_clock_offset = from_ms(parse_double(v)); }},
      {"drain_timeout_s", [](ScenarioConfig& c, const std::string& v) { c.drain_timeout_s = parse_double(v); }},
  };
  return m;
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"paper-bridged", "in-vehicle",     "comm-only",   "qos-sweep",
                                                 "size-sweep",    "format-compare", "tls-compare", "throughput-sweep"};
  return names;
}

Preset make_preset(const std::string& name) {
  Preset p = build(name);
  for (auto& r : p.runs) r.config.validate();
  return p;
}

void apply_override(Preset& p, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ParseError("override must be key=value: '" + assignment + "'", 0);
  const std::string key = assignment.substr(0, eq), value = assignment.substr(eq + 1);
  if (key == "rates") {
    if (p.sweep_rates.empty()) throw ValidationError("rates applies to throughput sweeps only");
    std::vector<double> rates;
    std::istringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) rates.push_back(parse_double(item));
    if (rates.empty()) throw ParseError("rates must list at least one value", 0);
    p.sweep_rates = rates;
  } else if (key == "windows") {
    if (p.sweep_rates.empty()) throw ValidationError("windows applies to throughput sweeps only");
    p.sweep_windows = parse_uint(value);
    if (p.sweep_windows < 2) throw ValidationError("windows must be at least 2");
  } else {
    auto it = setters().find(key);
    if (it == setters().end()) throw ParseError("unknown override key '" + key + "'", 0);
    for (auto& r : p.runs) it->second(r.config, value);
  }
  for (auto& r : p.runs) r.config.validate();
  for (double rate : p.sweep_rates)
    if (!(rate > 0)) throw ValidationError("sweep rates must be positive");
}

void apply_seed(Preset& p, std::uint64_t seed) {
  for (auto& r : p.runs) {
    r.config.seed = seed;
    r.config.shaper.seed = seed;
  }
}

const std::vector<std::string>& override_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, fn] : setters()) k.push_back(name);
    k.push_back("rates");
    k.push_back("windows");
    return k;
  }();
  return keys;
}

}  // namespace edgebench::harness
