#include "edgebench/harness/sweep.hpp"

#include <cmath>

#include "edgebench/harness/report_io.hpp"

namespace edgebench::harness {

bool backlog_saturated(const std::vector<long>& backlog) {
  if (backlog.size() < 2) return false;
  std::size_t rising = 0;
  for (std::size_t i = 1; i < backlog.size(); ++i) rising += backlog[i] > backlog[i - 1];
  return static_cast<double>(rising) >= 0.8 * static_cast<double>(backlog.size() - 1);
}

SweepReport sweep_throughput(ScenarioConfig base, const std::vector<double>& rates, std::size_t window_count,
                             Nanos window) {
  base.loop_through = true;
  SweepReport out;
  for (double rate : rates) {
    ScenarioConfig cfg = base;
    cfg.rate_hz = rate;
    cfg.sample_count = static_cast<std::size_t>(std::llround(rate * to_ms(window) / 1e3 * window_count));
    cfg.validate();
    RawRun run = collect_traces(cfg, RunHooks{window});
    Report rep = analyze(cfg, run, true);

    SweepPoint p;
    p.rate_hz = rate;
    p.published = run.published;
    p.completed = rep.samples.size();
    p.backlog = run.backlog;
    if (!rep.samples.empty()) {
      std::vector<double> totals;
      for (const auto& s : rep.samples) totals.push_back(s.total);
      p.mean_ms = summarize(totals).mean;
      p.p95_ms = percentile(totals, 95);
    }
    p.saturated = backlog_saturated(p.backlog);
    if (p.saturated && !out.saturation_hz) out.saturation_hz = rate;
    out.points.push_back(std::move(p));
  }

  std::vector<double> x, y;
  for (const auto& p : out.points) {
    if (out.saturation_hz && p.rate_hz >= *out.saturation_hz) continue;
    if (p.completed == 0) continue;
    x.push_back(p.rate_hz);
    y.push_back(p.mean_ms);
  }
  if (x.size() >= 3) out.below_saturation = slope_test(x, y);
  return out;
}

nlohmann::json sweep_json(const ScenarioConfig& base, const SweepReport& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : r.points)
    pts.push_back({{"rate_hz", p.rate_hz},
                   {"published", p.published},
                   {"completed", p.completed},
                   {"mean_ms", p.mean_ms},
                   {"p95_ms", p.p95_ms},
                   {"backlog", p.backlog},
                   {"saturated", p.saturated}});
  nlohmann::json j{{"report_version", kReportVersion}, {"scenario", config_json(base)}, {"points", pts}};
  j["saturation_hz"] = r.saturation_hz ? nlohmann::json(*r.saturation_hz) : nlohmann::json(nullptr);
  if (r.below_saturation) {
    const auto& s = *r.below_saturation;
    j["slope_test"] = {{"n", s.n}, {"slope_ms_per_hz", s.slope}, {"t", s.t_statistic}, {"p_value", s.p_value}};
  }
  return j;
}

}  // namespace edgebench::harness
