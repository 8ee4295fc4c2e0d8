#pragma once

#include <optional>
#include <string>

#include "edgebench/broker/broker.hpp"
#include "edgebench/config_error.hpp"

namespace edgebench::broker {

struct ListenerConfig {
  std::string host = "0.0.0.0";
  std::uint16_t port = 1883;
};

struct TlsListenerConfig {
  std::string host = "0.0.0.0";
  std::uint16_t port = 8883;
  /// PEM file paths; a self-signed identity is generated when both are empty.
  std::string cert_file;
  std::string key_file;
};

/// Broker config file:
///
///   listeners:
///     tcp: {host: 0.0.0.0, port: 1883}
///     tls: {port: 8883, cert: server.pem, key: server.key}
///   users:
///     - {user: admin, pass: password}        # or password_hash: pbkdf2-sha256$...
///   shapers:
///     vehicle: {delay_ms: 19, jitter_ms: 1, bandwidth: 0, drop: 0, seed: 1}
///   retransmit_ms: 1000
///   keepalive_factor: 1.5
///   log: broker.jsonl
struct BrokerFileConfig {
  std::optional<ListenerConfig> tcp = ListenerConfig{};
  std::optional<TlsListenerConfig> tls;
  BrokerOptions options;
  std::string log_file;
};

/// Throws ParseError or ValidationError.
BrokerFileConfig parse_broker_config(const std::string& text);
BrokerFileConfig load_broker_config(const std::string& path);

}  // namespace edgebench::broker
