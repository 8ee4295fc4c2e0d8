#include "edgebench/broker/broker_config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <sstream>

namespace edgebench::broker {

namespace {

template <typename T>
T get(const YAML::Node& n, const char* key, T fallback) {
  const auto v = n[key];
  if (!v) return fallback;
  try {
    return v.as<T>();
  } catch (const YAML::Exception& e) {
    throw ParseError(std::string("bad value for '") + key + "'", e.mark.line + 1);
  }
}

ShaperConfig parse_shaper(const YAML::Node& n) {
  ShaperConfig s;
  s.one_way_delay_ms = get(n, "delay_ms", 0.0);
  s.jitter_stddev_ms = get(n, "jitter_ms", 0.0);
  s.bandwidth_cap = get(n, "bandwidth", 0.0);
  s.drop_probability = get(n, "drop", 0.0);
  s.seed = get<std::uint64_t>(n, "seed", 1);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  return s;
}

}  // namespace

BrokerFileConfig parse_broker_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ParseError(e.msg, e.mark.line + 1);
  }
  BrokerFileConfig cfg;
  if (!root || root.IsNull()) return cfg;
  if (!root.IsMap()) throw ParseError("top level must be a mapping", 1);

  if (auto l = root["listeners"]) {
    cfg.tcp.reset();
    if (auto t = l["tcp"]) {
      ListenerConfig lc;
      lc.host = get(t, "host", lc.host);
      lc.port = get<std::uint16_t>(t, "port", lc.port);
      cfg.tcp = lc;
    }
    if (auto t = l["tls"]) {
      TlsListenerConfig tc;
      tc.host = get(t, "host", tc.host);
      tc.port = get<std::uint16_t>(t, "port", tc.port);
      tc.cert_file = get(t, "cert", std::string{});
      tc.key_file = get(t, "key", std::string{});
      if (tc.cert_file.empty() != tc.key_file.empty())
        throw ValidationError("tls listener needs both cert and key, or neither");
      cfg.tls = tc;
    }
    if (!cfg.tcp && !cfg.tls) throw ValidationError("no listener configured");
  }

  if (auto users = root["users"]) {
    if (!users.IsSequence()) throw ParseError("'users' must be a list", users.Mark().line + 1);
    for (const auto& u : users) {
      const auto name = get(u, "user", std::string{});
      if (name.empty()) throw ValidationError("user entry without 'user'");
      if (u["password_hash"])
        cfg.options.credentials.add_hashed(name, get(u, "password_hash", std::string{}));
      else if (u["pass"])
        cfg.options.credentials.add_user(name, get(u, "pass", std::string{}));
      else
        throw ValidationError("user '" + name + "' has neither pass nor password_hash");
    }
  }
  if (cfg.tls && !cfg.options.credentials.enabled())
    throw ValidationError("tls listener requires at least one user (client authentication)");

  if (auto shapers = root["shapers"]) {
    if (!shapers.IsMap()) throw ParseError("'shapers' must be a mapping", shapers.Mark().line + 1);
    for (const auto& kv : shapers) cfg.options.shapers[kv.first.as<std::string>()] = parse_shaper(kv.second);
  }

  cfg.options.retransmit_initial = from_ms(get(root, "retransmit_ms", 1000.0));
  cfg.options.keepalive_factor = get(root, "keepalive_factor", 1.5);
  cfg.log_file = get(root, "log", std::string{});
  if (cfg.options.retransmit_initial <= 0) throw ValidationError("retransmit_ms must be > 0");
  if (cfg.options.keepalive_factor < 1.0) throw ValidationError("keepalive_factor must be >= 1");
  return cfg;
}

BrokerFileConfig load_broker_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path, 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_broker_config(ss.str());
}

}  // namespace edgebench::broker
