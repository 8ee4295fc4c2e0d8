#pragma once

#include <optional>
#include <string>
#include <vector>

#include "edgebench/config_error.hpp"
#include "edgebench/mqtt/codec.hpp"

namespace edgebench::bridge {

struct BrokerEndpoint {
  std::string host = "localhost";
  std::uint16_t port = 1883;
  std::optional<std::string> user;
  std::optional<std::string> pass;
  bool tls = false;
  /// PEM file with the trusted CA; empty skips verification.
  std::string ca_file;
};

struct BridgeRule {
  std::string source_topic;
  std::string target_topic;
  mqtt::QoS qos = mqtt::QoS::AtMostOnce;
  bool inject_tracing = true;
  /// Type tag used for bus messages created from passthrough payloads.
  std::string type_tag = "raw";
};

struct BridgeConfig {
  BrokerEndpoint broker;
  std::string client_id;
  std::vector<BridgeRule> bus2mqtt;
  std::vector<BridgeRule> mqtt2bus;
};

/// Accepts `ros2mqtt`/`mqtt2ros` and `ros_topic` as aliases of
/// `bus2mqtt`/`mqtt2bus` and `bus_topic`. Throws ParseError / ValidationError.
BridgeConfig parse_bridge_config(const std::string& text);
BridgeConfig load_bridge_config(const std::string& path);

/// Checks topic validity on each side and duplicate sources per direction.
void validate(const BridgeConfig& cfg);

}  // namespace edgebench::bridge
