#pragma once

#include <cstdint>

namespace edgebench::probes {

// probe_id = component << 8 | edge
enum class Component : std::uint8_t {
  Source = 1,
  BridgeBusToMqtt = 2,
  BridgeMqttToBus = 3,
  Detector = 4,
  Sink = 5,
  Converter = 6,
};

enum class Edge : std::uint8_t { In = 0, Out = 1, Ack = 2 };

inline constexpr std::uint8_t kVehicleClock = 0;
inline constexpr std::uint8_t kCloudClock = 1;

constexpr std::uint16_t probe_id(Component c, Edge e) {
  return static_cast<std::uint16_t>((static_cast<unsigned>(c) << 8) | static_cast<unsigned>(e));
}
constexpr Component component_of(std::uint16_t id) { return static_cast<Component>(id >> 8); }
constexpr Edge edge_of(std::uint16_t id) { return static_cast<Edge>(id & 0xFF); }

}  // namespace edgebench::probes
