#include "edgebench/harness/report_io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "edgebench/config_error.hpp"

namespace edgebench::harness {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* qos_name(mqtt::QoS q) {
  switch (q) {
    case mqtt::QoS::AtMostOnce: return "0";
    case mqtt::QoS::AtLeastOnce: return "1";
    case mqtt::QoS::ExactlyOnce: return "2";
  }
  return "?";
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

nlohmann::json config_json(const ScenarioConfig& c) {
  return {{"name", c.name},
          {"topology", to_string(c.topology)},
          {"mode", c.simulated ? "sim" : "real"},
          {"rate_hz", c.rate_hz},
          {"sample_count", c.sample_count},
          {"qos", std::atoi(qos_name(c.qos))},
          {"tls", c.tls},
          {"format", to_string(c.format)},
          {"size_ratio", c.size_ratio},
          {"shaper",
           {{"delay_ms", c.shaper.one_way_delay_ms},
            {"jitter_ms", c.shaper.jitter_stddev_ms},
            {"bandwidth", c.shaper.bandwidth_cap},
            {"drop", c.shaper.drop_probability},
            {"seed", c.shaper.seed}}},
          {"cloud_detector_delay_ms", c.cloud_detector_delay_ms},
          {"vehicle_detector_delay_ms", c.vehicle_detector_delay_ms},
          {"loop_through", c.loop_through},
          {"single_sample", c.single_sample_mode},
          {"seed", c.seed},
          {"cloud_clock_offset_ns", c.cloud_clock_offset}};
}

nlohmann::json summary_json(const std::vector<LatencyBreakdown>& samples) {
  nlohmann::json out = nlohmann::json::object();
  if (samples.empty()) return out;
  for (const auto& [name, values] : report_series(samples)) {
    const auto s = summarize(values);
    out[name] = {{"n", s.n},           {"mean", s.mean}, {"median", s.median},
                 {"min", s.min},       {"max", s.max},   {"std_corrected", s.std_corrected}};
  }
  std::vector<double> totals;
  for (const auto& s : samples) totals.push_back(s.total);
  out["fraction_total_below_100ms"] = fraction_below(totals, 100.0);
  out["total_p95"] = percentile(totals, 95);
  return out;
}

nlohmann::json report_json(const Report& r) {
  return {{"report_version", kReportVersion},
          {"scenario", config_json(r.config)},
          {"samples", {{"published", r.published}, {"complete", r.samples.size()}, {"missing", r.missing}}},
          {"payload_bytes", r.payload_bytes},
          {"summary", summary_json(r.samples)},
          {"assumptions", r.notes}};
}

std::string samples_csv(const std::vector<LatencyBreakdown>& samples) {
  std::string out = "sample_id";
  for (const char* n : partial_names()) out += std::string(",") + n;
  out += ",total\n";
  for (const auto& s : samples) {
    out += std::to_string(s.sample_id);
    for (double v : s.partials()) out += "," + fmt(v);
    out += "," + fmt(s.total) + "\n";
  }
  return out;
}

std::string ecdf_csv(const std::vector<LatencyBreakdown>& samples) {
  std::string out = "value_ms,fraction\n";
  if (samples.empty()) return out;
  std::vector<double> totals;
  for (const auto& s : samples) totals.push_back(s.total);
  for (const auto& p : ecdf(totals)) out += fmt(p.value) + "," + fmt(p.fraction) + "\n";
  return out;
}

std::vector<LatencyBreakdown> parse_samples_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line)) throw ParseError("empty report CSV", 1);
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line, ',');
  if (header.size() != kPartialCount + 2 || header.front() != "sample_id" || header.back() != "total")
    throw ParseError("unexpected CSV header", lineno);
  for (std::size_t i = 0; i < kPartialCount; ++i)
    if (header[i + 1] != partial_names()[i]) throw ParseError("unexpected column '" + header[i + 1] + "'", lineno);

  std::vector<LatencyBreakdown> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) throw ParseError("wrong number of fields", lineno);
    LatencyBreakdown b;
    try {
      std::size_t used = 0;
      b.sample_id = std::stoull(cells[0], &used);
      if (used != cells[0].size()) throw std::invalid_argument("id");
    } catch (const std::exception&) {
      throw ParseError("bad sample_id '" + cells[0] + "'", lineno);
    }
    for (std::size_t i = 1; i < cells.size(); ++i) {
      const char* s = cells[i].c_str();
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(s, &end);
      if (cells[i].empty() || *end != '\0' || errno == ERANGE)
        throw ParseError("bad number '" + cells[i] + "'", lineno);
      if (i <= kPartialCount)
        set_partial(b, i - 1, v);
      else
        b.total = v;
    }
    out.push_back(b);
  }
  return out;
}

std::vector<LatencyBreakdown> read_samples_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_samples_csv(ss.str());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path);
}

ReportFiles write_report(const Report& r, const std::string& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  ReportFiles files{(base / (stem + ".json")).string(), (base / (stem + ".csv")).string(),
                    (base / (stem + "_ecdf.csv")).string()};
  write_text(files.json, report_json(r).dump(2) + "\n");
  write_text(files.csv, samples_csv(r.samples));
  write_text(files.ecdf, ecdf_csv(r.samples));
  return files;
}

}  // namespace edgebench::harness
