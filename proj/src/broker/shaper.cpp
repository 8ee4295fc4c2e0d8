#include "edgebench/broker/shaper.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace edgebench::broker {

namespace {
std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}
}  // namespace

void ShaperConfig::validate() const {
  if (!(one_way_delay_ms >= 0)) throw std::invalid_argument("shaper delay must be >= 0");
  if (!(jitter_stddev_ms >= 0)) throw std::invalid_argument("shaper jitter must be >= 0");
  if (!(bandwidth_cap >= 0)) throw std::invalid_argument("shaper bandwidth cap must be >= 0");
  if (!(drop_probability >= 0 && drop_probability <= 1))
    throw std::invalid_argument("shaper drop probability must lie in [0,1]");
}

Shaper::Shaper(ShaperConfig cfg)
    : cfg_(cfg), app_rng_(splitmix(cfg.seed)), ctl_rng_(splitmix(cfg.seed + 1)), drop_rng_(splitmix(cfg.seed + 2)) {
  cfg_.validate();
}

Nanos Shaper::jitter(FrameClass cls) {
  if (cfg_.jitter_stddev_ms <= 0) return 0;
  std::normal_distribution<double> dist(0.0, cfg_.jitter_stddev_ms * 1e6);
  auto& rng = cls == FrameClass::Control ? ctl_rng_ : app_rng_;
  return static_cast<Nanos>(std::llround(dist(rng)));
}

std::optional<Nanos> Shaper::shape(std::size_t frame_len, FrameClass cls, Nanos now) {
  if (cls == FrameClass::ApplicationQos0 && cfg_.drop_probability > 0) {
    std::bernoulli_distribution drop(cfg_.drop_probability);
    if (drop(drop_rng_)) {
      ++dropped_;
      return std::nullopt;
    }
  }
  const Nanos start = std::max(now, link_free_);
  const Nanos serialization =
      cfg_.bandwidth_cap > 0
          ? static_cast<Nanos>(std::llround(static_cast<double>(frame_len) / cfg_.bandwidth_cap * 1e9))
          : 0;
  link_free_ = start + serialization;
  const Nanos propagation = std::max<Nanos>(0, static_cast<Nanos>(std::llround(cfg_.one_way_delay_ms * 1e6)) + jitter(cls));
  const Nanos at = std::max(last_delivery_, link_free_ + propagation);
  last_delivery_ = at;
  return at;
}

}  // namespace edgebench::broker
