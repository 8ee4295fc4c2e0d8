#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "edgebench/scan/detect.hpp"
#include "edgebench/scan/scan.hpp"

using namespace edgebench;
using namespace edgebench::scan;

namespace {

// Independent walk over the raw packet bytes.
std::size_t brute_valid(const CompactScan& s) {
  std::size_t n = 0;
  for (const auto& p : s.packets)
    for (std::size_t b = 0; b < 12; ++b)
      for (std::size_t l = 0; l < 32; ++l) {
        const std::size_t off = b * 100 + 4 + l * 3;
        if (p[off] | p[off + 1]) ++n;
      }
  return n;
}

Packet blank_packet() {
  Packet p{};
  for (std::size_t b = 0; b < 12; ++b) {
    p[b * 100] = 0xFF;
    p[b * 100 + 1] = 0xEE;
  }
  p[1204] = kReturnMode;
  p[1205] = kModelCode;
  return p;
}

}  // namespace

TEST_CASE("reference scan sizes") {
  const auto s = reference_scan();
  CHECK(s.packets.size() == 150);
  CHECK(count_valid_returns(s) == kReferenceValidReturns);
  CHECK(brute_valid(s) == kReferenceValidReturns);
  CHECK(serialize(s).size() == 16 + 1206 * 150);
  CHECK(serialized_size(s) == 16 + 1206 * 150);

  const auto c = expand(s, Calibration::vlp32c());
  CHECK(c.points.size() == kReferenceValidReturns);
  CHECK(serialize(c).size() == 16 + 22 * 49016);
  const double ratio = double(serialize(c).size()) / serialize(s).size();
  CHECK(ratio > 5.8);
  CHECK(ratio < 6.2);
}

TEST_CASE("generation is deterministic with equidistant azimuths") {
  CHECK(serialize(generate_scan(20, 0.5, 3)) == serialize(generate_scan(20, 0.5, 3)));
  CHECK(serialize(generate_scan(20, 0.5, 3)) != serialize(generate_scan(20, 0.5, 4)));
  const auto s = generate_scan(20, 0.37, 9);
  CHECK(count_valid_returns(s) == std::size_t(std::lround(0.37 * 20 * 384)));
  CHECK(brute_valid(s) == count_valid_returns(s));

  // 240 blocks over 360 degrees: 1.5 degree steps
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t b = 0; b < 12; ++b) CHECK(block_azimuth(s.packets[i], b) == (i * 12 + b) * 150);

  const auto empty = generate_scan(0, 0.5, 1);
  CHECK(empty.packets.empty());
  CHECK(serialize(empty).size() == 16);
}

TEST_CASE("downsampling") {
  const auto s = reference_scan();
  const auto q = downsample(s, 0.25, 1);
  CHECK(q.packets.size() == 37);
  CHECK(downsample(s, 1.0, 1) == s);
  CHECK(downsample(s, 0.0, 1).packets.empty());
  // kept packets stay in their original order
  std::size_t j = 0;
  for (const auto& p : s.packets)
    if (j < q.packets.size() && p == q.packets[j]) ++j;
  CHECK(j == q.packets.size());

  // Mean fraction of valid returns kept tracks the ratio.
  const double total = double(count_valid_returns(s));
  double sum = 0;
  const int seeds = 200;
  for (int seed = 0; seed < seeds; ++seed) sum += count_valid_returns(downsample(s, 0.5, seed)) / total;
  CHECK(std::abs(sum / seeds - 0.5) < 0.01);
}

TEST_CASE("expansion geometry") {
  Calibration cal;
  for (std::size_t i = 0; i < kLasers; ++i) cal.elevation_deg[i] = double(i);
  CHECK_NOTHROW(cal.validate());
  CompactScan s;
  auto p = blank_packet();
  p[2] = 9000 & 0xFF;  // azimuth 90 degrees
  p[3] = 9000 >> 8;
  p[4] = 500 & 0xFF;  // 500 * 2 mm = 1 m on laser 0
  p[5] = 500 >> 8;
  p[6] = 77;
  s.packets.push_back(p);
  const auto c = expand(s, cal);
  REQUIRE(c.points.size() == 1);
  CHECK(c.points[0].x == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(c.points[0].y == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(std::abs(c.points[0].y) < 1e-6);
  CHECK(std::abs(c.points[0].z) < 1e-6);
  CHECK(c.points[0].intensity == 77);
  CHECK(c.points[0].ring == 0);

  Calibration bad = cal;
  bad.elevation_deg[3] = bad.elevation_deg[2];
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("serialization round-trips") {
  auto s = generate_scan(5, 0.8, 2);
  s.frame_id = "lidar";
  CHECK(parse_compact(serialize(s)) == s);
  const auto c = expand(s, Calibration::vlp32c());
  CHECK(parse_expanded(serialize(c)) == c);
  CHECK(serialize(c).size() == serialized_size(c));

  ObjectList o;
  o.stamp = 99;
  Object ob;
  ob.center[0] = 1.5f;
  ob.extent[2] = 0.25f;
  ob.point_count = 12;
  o.objects = {ob, ob};
  CHECK(parse_objects(serialize(o)) == o);

  auto bytes = serialize(s);
  bytes.resize(bytes.size() - 1);
  CHECK_THROWS_AS(parse_compact(bytes), std::runtime_error);

  CHECK(decode_scan_file(encode_scan_file(s)) == s);
  const auto path = (std::filesystem::temp_directory_path() / "edgebench_scan_test.cscn").string();
  save_scan(path, s);
  CHECK(load_scan(path) == s);
  std::remove(path.c_str());
}

TEST_CASE("grid clustering") {
  ExpandedCloud c;
  std::mt19937 rng(5);
  std::uniform_real_distribution<float> u(-0.3f, 0.3f);
  for (int i = 0; i < 100; ++i) c.points.push_back({5 + u(rng), 5 + u(rng), u(rng), 1, 0, 0});
  for (int i = 0; i < 100; ++i) c.points.push_back({20 + u(rng), -10 + u(rng), u(rng), 1, 0, 0});
  // too small to count, below ground, out of range
  for (int i = 0; i < 3; ++i) c.points.push_back({-8, -8, 0, 1, 0, 0});
  for (int i = 0; i < 50; ++i) c.points.push_back({-3 + u(rng), 3, -2, 1, 0, 0});
  for (int i = 0; i < 50; ++i) c.points.push_back({45 + u(rng), 0, 0, 1, 0, 0});

  DetectConfig cfg;
  const auto objs = cluster(c, cfg);
  REQUIRE(objs.objects.size() == 2);
  std::uint32_t total = 0;
  for (auto& o : objs.objects) {
    total += o.point_count;
    for (int d = 0; d < 3; ++d) CHECK(o.extent[d] > 0);
  }
  CHECK(total == 200);
  CHECK(cluster(c, cfg) == objs);
  CHECK(cluster(ExpandedCloud{}, cfg).objects.empty());
}

TEST_CASE("detect waits for the configured compute delay") {
  DetectConfig cfg;
  cfg.fixed_compute_delay_ms = 20;
  const auto t0 = std::chrono::steady_clock::now();
  const auto out = detect(ExpandedCloud{}, cfg);
  CHECK(out.objects.empty());
  CHECK(std::chrono::steady_clock::now() - t0 >= std::chrono::milliseconds(20));
}
