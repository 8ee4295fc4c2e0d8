#include "edgebench/bridge/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

#include "edgebench/mqtt/topic.hpp"

namespace edgebench::bridge {

namespace {

int line_of(const YAML::Node& n) { return n.Mark().line + 1; }

template <typename T>
T scalar(const YAML::Node& n, const char* key) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ParseError(std::string("bad value for '") + key + "'", line_of(n));
  }
}

std::string first_of(const YAML::Node& entry, std::initializer_list<const char*> keys) {
  for (const char* k : keys)
    if (auto v = entry[k]) return scalar<std::string>(v, k);
  return {};
}

std::vector<BridgeRule> parse_rules(const YAML::Node& list, bool bus_to_mqtt, const char* section) {
  if (!list.IsSequence()) throw ParseError(std::string("'") + section + "' must be a list", line_of(list));
  std::vector<BridgeRule> rules;
  for (const auto& e : list) {
    if (!e.IsMap()) throw ParseError(std::string("entries of '") + section + "' must be mappings", line_of(e));
    const std::string bus_topic = first_of(e, {"bus_topic", "ros_topic"});
    const std::string mqtt_topic = first_of(e, {"mqtt_topic"});
    if (bus_topic.empty() || mqtt_topic.empty())
      throw ValidationError(std::string(section) + " rule at line " + std::to_string(line_of(e)) +
                            " needs both a bus topic and an mqtt_topic");
    BridgeRule r;
    r.source_topic = bus_to_mqtt ? bus_topic : mqtt_topic;
    r.target_topic = bus_to_mqtt ? mqtt_topic : bus_topic;
    if (auto q = e["qos"]) {
      const int v = scalar<int>(q, "qos");
      auto qos = mqtt::qos_from_int(v);
      if (!qos) throw ValidationError("qos must be 0, 1 or 2 (line " + std::to_string(line_of(q)) + ")");
      r.qos = *qos;
    }
    if (auto t = e["inject_tracing"]) r.inject_tracing = scalar<bool>(t, "inject_tracing");
    if (auto t = e["type_tag"]) r.type_tag = scalar<std::string>(t, "type_tag");
    rules.push_back(std::move(r));
  }
  return rules;
}

}  // namespace

BridgeConfig parse_bridge_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ParseError(e.msg, e.mark.line + 1);
  }
  if (!root || !root.IsMap()) throw ParseError("top level must be a mapping", 1);

  BridgeConfig cfg;
  if (auto b = root["broker"]) {
    if (auto v = b["host"]) cfg.broker.host = scalar<std::string>(v, "host");
    if (auto v = b["port"]) cfg.broker.port = scalar<std::uint16_t>(v, "port");
    if (auto v = b["user"]) cfg.broker.user = scalar<std::string>(v, "user");
    if (auto v = b["pass"]) cfg.broker.pass = scalar<std::string>(v, "pass");
    if (auto v = b["tls"]) {
      if (v.IsMap()) {
        cfg.broker.tls = v["enabled"] ? scalar<bool>(v["enabled"], "enabled") : true;
        if (auto ca = v["ca_file"]) cfg.broker.ca_file = scalar<std::string>(ca, "ca_file");
      } else {
        cfg.broker.tls = scalar<bool>(v, "tls");
      }
    }
  }
  if (auto c = root["client"]) {
    if (auto v = c["id"]) cfg.client_id = scalar<std::string>(v, "id");
  }
  auto bridge = root["bridge"];
  if (!bridge || bridge.IsNull()) throw ValidationError("missing 'bridge' section: nothing to bridge");
  if (!bridge.IsMap()) throw ParseError("'bridge' must be a mapping", line_of(bridge));
  for (const auto& kv : bridge) {
    const auto key = kv.first.as<std::string>();
    if (key == "bus2mqtt" || key == "ros2mqtt") {
      auto r = parse_rules(kv.second, true, key.c_str());
      cfg.bus2mqtt.insert(cfg.bus2mqtt.end(), r.begin(), r.end());
    } else if (key == "mqtt2bus" || key == "mqtt2ros") {
      auto r = parse_rules(kv.second, false, key.c_str());
      cfg.mqtt2bus.insert(cfg.mqtt2bus.end(), r.begin(), r.end());
    } else {
      throw ParseError("unknown bridge key '" + key + "'", line_of(kv.first));
    }
  }
  validate(cfg);
  return cfg;
}

void validate(const BridgeConfig& cfg) {
  if (cfg.bus2mqtt.empty() && cfg.mqtt2bus.empty()) throw ValidationError("bridge section has no rules");
  if (cfg.broker.pass && !cfg.broker.user) throw ValidationError("broker.pass given without broker.user");
  auto check = [](const std::vector<BridgeRule>& rules, bool bus_to_mqtt, const char* dir) {
    std::set<std::string> seen;
    for (const auto& r : rules) {
      const auto& mqtt_side = bus_to_mqtt ? r.target_topic : r.source_topic;
      const auto& bus_side = bus_to_mqtt ? r.source_topic : r.target_topic;
      if (auto v = mqtt::validate_topic(mqtt_side, bus_to_mqtt ? mqtt::TopicKind::Name : mqtt::TopicKind::Filter))
        throw ValidationError(std::string(dir) + ": invalid mqtt topic '" + mqtt_side + "' (" + mqtt::to_string(*v) + ")");
      if (bus_side.empty() || bus_side.find_first_of("+#") != std::string::npos || !mqtt::is_valid_utf8(bus_side))
        throw ValidationError(std::string(dir) + ": invalid bus topic '" + bus_side + "'");
      if (!seen.insert(r.source_topic).second)
        throw ValidationError(std::string(dir) + ": duplicate source topic '" + r.source_topic + "'");
    }
  };
  check(cfg.bus2mqtt, true, "bus2mqtt");
  check(cfg.mqtt2bus, false, "mqtt2bus");
}

BridgeConfig load_bridge_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path, 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_bridge_config(ss.str());
}

}  // namespace edgebench::bridge
