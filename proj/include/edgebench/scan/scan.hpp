#pragma once

// Lidar data model. A compact scan is a list of 1206-byte sensor packets
// (12 firing blocks of 32 returns); an expanded cloud holds one 22-byte
// Cartesian point per valid return.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "edgebench/bytes.hpp"

namespace edgebench::scan {

inline constexpr std::size_t kPacketSize = 1206;
inline constexpr std::size_t kBlocksPerPacket = 12;
inline constexpr std::size_t kLasers = 32;
inline constexpr std::size_t kReturnsPerPacket = kBlocksPerPacket * kLasers;
inline constexpr std::size_t kBlockSize = 100;  // flag 2 + azimuth 2 + 32 x 3
inline constexpr std::uint16_t kBlockFlag = 0xEEFF;  // bytes FF EE on the wire
inline constexpr std::uint8_t kReturnMode = 0x37;
inline constexpr std::uint8_t kModelCode = 0x28;
inline constexpr double kDistanceUnit = 0.002;  // metres per raw count
inline constexpr std::size_t kHeaderBytes = 16;
inline constexpr std::size_t kPointBytes = 22;

/// Reference scan: 150 packets with 49016 valid returns.
inline constexpr std::size_t kReferencePackets = 150;
inline constexpr std::size_t kReferenceValidReturns = 49016;

using Packet = std::array<std::uint8_t, kPacketSize>;

struct CompactScan {
  std::uint64_t stamp = 0;
  std::string frame_id;
  std::vector<Packet> packets;
  bool operator==(const CompactScan&) const = default;
};

struct Point {
  float x = 0, y = 0, z = 0;
  float intensity = 0;
  std::uint16_t ring = 0;
  float time_offset = 0;
  bool operator==(const Point&) const = default;
};

struct ExpandedCloud {
  std::uint64_t stamp = 0;
  std::string frame_id;
  std::vector<Point> points;
  bool operator==(const ExpandedCloud&) const = default;
};

struct Object {
  float center[3] = {0, 0, 0};
  float extent[3] = {0, 0, 0};
  std::uint32_t point_count = 0;
  bool operator==(const Object& o) const;
};

struct ObjectList {
  std::uint64_t stamp = 0;
  std::vector<Object> objects;
  bool operator==(const ObjectList&) const = default;
};

struct Calibration {
  std::array<double, kLasers> elevation_deg{};
  /// VLP-32C style angles, sorted ascending; ring index = laser channel.
  static Calibration vlp32c();
  /// Throws std::invalid_argument unless strictly increasing.
  void validate() const;
};

// Packet field access.
std::uint16_t block_azimuth(const Packet& p, std::size_t block);
std::uint16_t return_distance(const Packet& p, std::size_t block, std::size_t laser);
std::uint8_t return_intensity(const Packet& p, std::size_t block, std::size_t laser);
std::size_t count_valid_returns(const CompactScan& s);

/// Deterministic synthetic scan: equidistant azimuths over 360 degrees and
/// exactly round(valid_fraction * n_packets * 384) returns with distance > 0.
CompactScan generate_scan(std::size_t n_packets, double valid_fraction, std::uint64_t seed);
CompactScan reference_scan(std::uint64_t seed = 1);

/// Keeps floor(ratio * n) packets chosen uniformly without replacement, in order.
CompactScan downsample(const CompactScan& s, double ratio, std::uint64_t seed);

ExpandedCloud expand(const CompactScan& s, const Calibration& calib);

// Serialized forms. Compact: 16 + 1206 n bytes; expanded: 16 + 22 n bytes
// (both with an empty frame_id).
Bytes serialize(const CompactScan& s);
Bytes serialize(const ExpandedCloud& c);
Bytes serialize(const ObjectList& o);
/// Throw std::runtime_error on malformed input.
CompactScan parse_compact(ByteView b);
ExpandedCloud parse_expanded(ByteView b);
ObjectList parse_objects(ByteView b);

std::size_t serialized_size(const CompactScan& s);
std::size_t serialized_size(const ExpandedCloud& c);

/// Scan file: "CSCN" | version u8 | stamp u64 | frame_id (u32 len + bytes) | n u32 | packets.
void save_scan(const std::string& path, const CompactScan& s);
CompactScan load_scan(const std::string& path);
Bytes encode_scan_file(const CompactScan& s);
CompactScan decode_scan_file(ByteView b);

}  // namespace edgebench::scan
