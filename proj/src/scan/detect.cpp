#include "edgebench/scan/detect.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>
#include <unordered_map>

namespace edgebench::scan {

namespace {

struct CellKey {
  std::int32_t x, y;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    return std::hash<std::uint64_t>{}((std::uint64_t(std::uint32_t(k.x)) << 32) | std::uint32_t(k.y));
  }
};

}  // namespace

ObjectList cluster(const ExpandedCloud& cloud, const DetectConfig& cfg) {
  ObjectList out;
  out.stamp = cloud.stamp;
  const double r2max = cfg.max_range * cfg.max_range;

  std::unordered_map<CellKey, std::vector<std::uint32_t>, CellHash> cells;
  for (std::uint32_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    if (p.z < cfg.z_min || double(p.x) * p.x + double(p.y) * p.y > r2max) continue;
    CellKey k{static_cast<std::int32_t>(std::floor(p.x / cfg.cell)), static_cast<std::int32_t>(std::floor(p.y / cfg.cell))};
    cells[k].push_back(i);
  }

  // Visit cells in a fixed order so that the output does not depend on hashing.
  std::vector<CellKey> keys;
  keys.reserve(cells.size());
  for (auto& [k, v] : cells) keys.push_back(k);
  std::sort(keys.begin(), keys.end(), [](const CellKey& a, const CellKey& b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });

  std::unordered_map<CellKey, bool, CellHash> seen;
  for (const auto& start : keys) {
    if (seen[start]) continue;
    std::vector<CellKey> stack{start};
    seen[start] = true;
    std::vector<std::uint32_t> members;
    while (!stack.empty()) {
      const CellKey c = stack.back();
      stack.pop_back();
      const auto& pts = cells[c];
      members.insert(members.end(), pts.begin(), pts.end());
      const CellKey nbrs[4] = {{c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
      for (const auto& n : nbrs) {
        if (!cells.count(n) || seen[n]) continue;
        seen[n] = true;
        stack.push_back(n);
      }
    }
    if (members.size() < cfg.min_cluster_size) continue;
    float lo[3] = {std::numeric_limits<float>::max(), std::numeric_limits<float>::max(), std::numeric_limits<float>::max()};
    float hi[3] = {std::numeric_limits<float>::lowest(), std::numeric_limits<float>::lowest(),
                   std::numeric_limits<float>::lowest()};
    for (auto i : members) {
      const auto& p = cloud.points[i];
      const float v[3] = {p.x, p.y, p.z};
      for (int d = 0; d < 3; ++d) {
        lo[d] = std::min(lo[d], v[d]);
        hi[d] = std::max(hi[d], v[d]);
      }
    }
    Object o;
    for (int d = 0; d < 3; ++d) {
      o.center[d] = (lo[d] + hi[d]) / 2;
      // A cluster may be flat along an axis; keep extents strictly positive.
      o.extent[d] = std::max(hi[d] - lo[d], static_cast<float>(cfg.cell) * 0.01f);
    }
    o.point_count = static_cast<std::uint32_t>(members.size());
    out.objects.push_back(o);
  }
  return out;
}

ObjectList detect(const ExpandedCloud& cloud, const DetectConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  ObjectList out = cluster(cloud, cfg);
  const auto until = start + std::chrono::nanoseconds(static_cast<std::int64_t>(cfg.fixed_compute_delay_ms * 1e6));
  while (std::chrono::steady_clock::now() < until) std::this_thread::yield();
  return out;
}

}  // namespace edgebench::scan
