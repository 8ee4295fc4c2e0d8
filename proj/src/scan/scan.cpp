#include "edgebench/scan/scan.hpp"

#include <algorithm>
#include <cstring>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace edgebench::scan {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSensorHeight = 1.8;
constexpr double kBlockDuration = 55.296e-6;
constexpr double kFiringDuration = 2.304e-6;

struct SynthObject {
  double azimuth_deg;
  double half_width_deg;
  double range;
};

// A few upright objects around the sensor so that detection has work to do.
constexpr SynthObject kObjects[] = {{30, 4, 12}, {110, 3, 18}, {205, 5, 9}, {290, 3, 25}};

double angle_diff(double a, double b) {
  double d = std::fmod(std::fabs(a - b), 360.0);
  return d > 180 ? 360 - d : d;
}

double synth_distance(double az_deg, double elev_deg, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 0.03);
  const double s = std::sin(elev_deg * kPi / 180);
  for (const auto& o : kObjects) {
    if (angle_diff(az_deg, o.azimuth_deg) > o.half_width_deg) continue;
    const double z = o.range * s;
    if (z >= -kSensorHeight + 0.1 && z <= 0.5) return o.range + noise(rng);
  }
  if (elev_deg < -1.0) {
    const double d = kSensorHeight / std::tan(-elev_deg * kPi / 180);
    if (d < 70) return d + noise(rng);
  }
  std::uniform_real_distribution<double> far(45.0, 60.0);
  return far(rng);
}

std::size_t block_offset(std::size_t block) { return block * kBlockSize; }
std::size_t return_offset(std::size_t block, std::size_t laser) { return block_offset(block) + 4 + laser * 3; }

struct Reader {
  ByteView b;
  std::size_t off = 0;
  void need(std::size_t n) const {
    if (b.size() - off < n) throw std::runtime_error("truncated scan data");
  }
  std::uint32_t u32() {
    need(4);
    auto v = get_le32(&b[off]);
    off += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    auto v = get_le64(&b[off]);
    off += 8;
    return v;
  }
  float f32() {
    need(4);
    auto v = get_f32(&b[off]);
    off += 4;
    return v;
  }
  std::uint16_t u16() {
    need(2);
    auto v = get_le16(&b[off]);
    off += 2;
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(&b[off]), n);
    off += n;
    return s;
  }
  void done() const {
    if (off != b.size()) throw std::runtime_error("trailing bytes after scan data");
  }
};

void put_str(Bytes& out, const std::string& s) {
  put_le32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

std::vector<Packet> read_packets(Reader& r, std::uint32_t n) {
  r.need(static_cast<std::size_t>(n) * kPacketSize);
  std::vector<Packet> packets(n);
  for (auto& p : packets) {
    std::copy_n(&r.b[r.off], kPacketSize, p.begin());
    r.off += kPacketSize;
  }
  return packets;
}

}  // namespace

bool Object::operator==(const Object& o) const {
  return std::equal(center, center + 3, o.center) && std::equal(extent, extent + 3, o.extent) &&
         point_count == o.point_count;
}

Calibration Calibration::vlp32c() {
  return Calibration{{-25.0,  -15.639, -11.31, -8.843, -7.254, -6.148, -5.333, -4.667, -4.0,   -3.667, -3.333,
                      -3.0,   -2.667,  -2.333, -2.0,   -1.667, -1.333, -1.0,   -0.667, -0.333, 0.0,    0.333,
                      0.667,  1.0,     1.333,  1.667,  2.333,  3.333,  4.667,  7.0,    10.333, 15.0}};
}

void Calibration::validate() const {
  for (std::size_t i = 1; i < kLasers; ++i)
    if (!(elevation_deg[i] > elevation_deg[i - 1]))
      throw std::invalid_argument("calibration elevations must be strictly increasing");
}

std::uint16_t block_azimuth(const Packet& p, std::size_t block) { return get_le16(&p[block_offset(block) + 2]); }

std::uint16_t return_distance(const Packet& p, std::size_t block, std::size_t laser) {
  return get_le16(&p[return_offset(block, laser)]);
}

std::uint8_t return_intensity(const Packet& p, std::size_t block, std::size_t laser) {
  return p[return_offset(block, laser) + 2];
}

std::size_t count_valid_returns(const CompactScan& s) {
  std::size_t n = 0;
  for (const auto& p : s.packets)
    for (std::size_t b = 0; b < kBlocksPerPacket; ++b)
      for (std::size_t l = 0; l < kLasers; ++l) n += return_distance(p, b, l) > 0;
  return n;
}

CompactScan generate_scan(std::size_t n_packets, double valid_fraction, std::uint64_t seed) {
  if (!(valid_fraction >= 0 && valid_fraction <= 1)) throw std::invalid_argument("valid_fraction must lie in [0,1]");
  CompactScan s;
  s.packets.resize(n_packets);
  const std::size_t total = n_packets * kReturnsPerPacket;
  const auto k = static_cast<std::size_t>(std::llround(valid_fraction * static_cast<double>(total)));

  std::mt19937_64 rng(seed);
  std::vector<std::uint32_t> order(total);
  std::iota(order.begin(), order.end(), 0u);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> valid(total, false);
  for (std::size_t i = 0; i < k; ++i) valid[order[i]] = true;

  const auto calib = Calibration::vlp32c();
  std::uniform_int_distribution<int> intensity(1, 255);
  const double blocks = static_cast<double>(n_packets * kBlocksPerPacket);
  for (std::size_t i = 0; i < n_packets; ++i) {
    Packet& p = s.packets[i];
    p.fill(0);
    for (std::size_t b = 0; b < kBlocksPerPacket; ++b) {
      const double az_units = std::round(static_cast<double>(i * kBlocksPerPacket + b) * 36000.0 / blocks);
      const auto az = static_cast<std::uint16_t>(static_cast<long>(az_units) % 36000);
      const std::size_t bo = block_offset(b);
      p[bo] = 0xFF;
      p[bo + 1] = 0xEE;
      p[bo + 2] = static_cast<std::uint8_t>(az);
      p[bo + 3] = static_cast<std::uint8_t>(az >> 8);
      for (std::size_t l = 0; l < kLasers; ++l) {
        if (!valid[i * kReturnsPerPacket + b * kLasers + l]) continue;
        const double d = synth_distance(az * 0.01, calib.elevation_deg[l], rng);
        const auto raw = static_cast<std::uint16_t>(std::clamp<long>(std::lround(d / kDistanceUnit), 1, 65535));
        const std::size_t ro = return_offset(b, l);
        p[ro] = static_cast<std::uint8_t>(raw);
        p[ro + 1] = static_cast<std::uint8_t>(raw >> 8);
        p[ro + 2] = static_cast<std::uint8_t>(intensity(rng));
      }
    }
    const auto ts = static_cast<std::uint32_t>(i * 553);
    for (int j = 0; j < 4; ++j) p[1200 + j] = static_cast<std::uint8_t>(ts >> (8 * j));
    p[1204] = kReturnMode;
    p[1205] = kModelCode;
  }
  return s;
}

CompactScan reference_scan(std::uint64_t seed) {
  return generate_scan(kReferencePackets,
                       static_cast<double>(kReferenceValidReturns) / (kReferencePackets * kReturnsPerPacket), seed);
}

CompactScan downsample(const CompactScan& s, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0 && ratio <= 1)) throw std::invalid_argument("ratio must lie in [0,1]");
  const std::size_t n = s.packets.size();
  const auto keep = std::min(n, static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `keep` entries are a uniform sample.
  for (std::size_t i = 0; i < keep; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  CompactScan out;
  out.stamp = s.stamp;
  out.frame_id = s.frame_id;
  out.packets.reserve(keep);
  for (auto i : idx) out.packets.push_back(s.packets[i]);
  return out;
}

ExpandedCloud expand(const CompactScan& s, const Calibration& calib) {
  ExpandedCloud c;
  c.stamp = s.stamp;
  c.frame_id = s.frame_id;
  std::array<double, kLasers> cos_w, sin_w;
  for (std::size_t l = 0; l < kLasers; ++l) {
    const double w = calib.elevation_deg[l] * kPi / 180;
    cos_w[l] = std::cos(w);
    sin_w[l] = std::sin(w);
  }
  c.points.reserve(s.packets.size() * kReturnsPerPacket);
  for (const auto& p : s.packets) {
    for (std::size_t b = 0; b < kBlocksPerPacket; ++b) {
      const double a = block_azimuth(p, b) * 0.01 * kPi / 180;
      const double sa = std::sin(a), ca = std::cos(a);
      for (std::size_t l = 0; l < kLasers; ++l) {
        const std::uint16_t raw = return_distance(p, b, l);
        if (raw == 0) continue;
        const double r = raw * kDistanceUnit;
        Point pt;
        pt.x = static_cast<float>(r * cos_w[l] * sa);
        pt.y = static_cast<float>(r * cos_w[l] * ca);
        pt.z = static_cast<float>(r * sin_w[l]);
        pt.intensity = static_cast<float>(return_intensity(p, b, l));
        pt.ring = static_cast<std::uint16_t>(l);
        pt.time_offset = static_cast<float>(b * kBlockDuration + l * kFiringDuration);
        c.points.push_back(pt);
      }
    }
  }
  return c;
}

std::size_t serialized_size(const CompactScan& s) {
  return kHeaderBytes + s.frame_id.size() + kPacketSize * s.packets.size();
}

std::size_t serialized_size(const ExpandedCloud& c) {
  return kHeaderBytes + c.frame_id.size() + kPointBytes * c.points.size();
}

Bytes serialize(const CompactScan& s) {
  Bytes out;
  out.reserve(serialized_size(s));
  put_le64(out, s.stamp);
  put_str(out, s.frame_id);
  put_le32(out, static_cast<std::uint32_t>(s.packets.size()));
  for (const auto& p : s.packets) out.insert(out.end(), p.begin(), p.end());
  return out;
}

Bytes serialize(const ExpandedCloud& c) {
  Bytes out;
  out.reserve(serialized_size(c));
  put_le64(out, c.stamp);
  put_str(out, c.frame_id);
  put_le32(out, static_cast<std::uint32_t>(c.points.size()));
  const std::size_t head = out.size();
  out.resize(head + kPointBytes * c.points.size());
  // Point bodies are written in place; appending byte by byte is several times slower.
  std::uint8_t* w = out.data() + head;
  auto f32 = [&w](float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    for (int i = 0; i < 4; ++i) *w++ = static_cast<std::uint8_t>(u >> (8 * i));
  };
  for (const auto& p : c.points) {
    f32(p.x);
    f32(p.y);
    f32(p.z);
    f32(p.intensity);
    *w++ = static_cast<std::uint8_t>(p.ring);
    *w++ = static_cast<std::uint8_t>(p.ring >> 8);
    f32(p.time_offset);
  }
  return out;
}

Bytes serialize(const ObjectList& o) {
  Bytes out;
  put_le64(out, o.stamp);
  put_le32(out, static_cast<std::uint32_t>(o.objects.size()));
  for (const auto& obj : o.objects) {
    for (float v : obj.center) put_f32(out, v);
    for (float v : obj.extent) put_f32(out, v);
    put_le32(out, obj.point_count);
  }
  return out;
}

CompactScan parse_compact(ByteView b) {
  Reader r{b};
  CompactScan s;
  s.stamp = r.u64();
  s.frame_id = r.str();
  s.packets = read_packets(r, r.u32());
  r.done();
  return s;
}

ExpandedCloud parse_expanded(ByteView b) {
  Reader r{b};
  ExpandedCloud c;
  c.stamp = r.u64();
  c.frame_id = r.str();
  const std::uint32_t n = r.u32();
  r.need(static_cast<std::size_t>(n) * kPointBytes);
  c.points.resize(n);
  for (auto& p : c.points) {
    p.x = r.f32();
    p.y = r.f32();
    p.z = r.f32();
    p.intensity = r.f32();
    p.ring = r.u16();
    p.time_offset = r.f32();
  }
  r.done();
  return c;
}

ObjectList parse_objects(ByteView b) {
  Reader r{b};
  ObjectList o;
  o.stamp = r.u64();
  const std::uint32_t n = r.u32();
  r.need(static_cast<std::size_t>(n) * 28);
  o.objects.resize(n);
  for (auto& obj : o.objects) {
    for (float& v : obj.center) v = r.f32();
    for (float& v : obj.extent) v = r.f32();
    obj.point_count = r.u32();
  }
  r.done();
  return o;
}

Bytes encode_scan_file(const CompactScan& s) {
  Bytes out = {'C', 'S', 'C', 'N', 1};
  Bytes body = serialize(s);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

CompactScan decode_scan_file(ByteView b) {
  if (b.size() < 5 || b[0] != 'C' || b[1] != 'S' || b[2] != 'C' || b[3] != 'N')
    throw std::runtime_error("not a scan file (bad magic)");
  if (b[4] != 1) throw std::runtime_error("unsupported scan file version " + std::to_string(b[4]));
  return parse_compact(b.subspan(5));
}

void save_scan(const std::string& path, const CompactScan& s) {
  const Bytes data = encode_scan_file(s);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

CompactScan load_scan(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string data = ss.str();
  return decode_scan_file(as_bytes(data));
}

}  // namespace edgebench::scan
