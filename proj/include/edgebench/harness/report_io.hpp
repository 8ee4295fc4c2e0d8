#pragma once

#include <string>
#include <vector>

#include "edgebench/harness/scenario.hpp"
#include "json.hpp"

namespace edgebench::harness {

inline constexpr int kReportVersion = 1;

nlohmann::json config_json(const ScenarioConfig& cfg);
/// Summary statistics of every series, keyed by series name.
nlohmann::json summary_json(const std::vector<LatencyBreakdown>& samples);
nlohmann::json report_json(const Report& r);

/// One row per sample: sample_id, each partial, total (ms, round-trip precision).
std::string samples_csv(const std::vector<LatencyBreakdown>& samples);
/// ECDF of the total latency: value_ms,fraction.
std::string ecdf_csv(const std::vector<LatencyBreakdown>& samples);

/// Throws ParseError.
std::vector<LatencyBreakdown> parse_samples_csv(const std::string& text);
/// Throws ParseError, or ValidationError if the file cannot be read.
std::vector<LatencyBreakdown> read_samples_csv(const std::string& path);

struct ReportFiles {
  std::string json, csv, ecdf;
};

/// Writes <dir>/<stem>.json, <stem>.csv and <stem>_ecdf.csv, creating `dir`.
ReportFiles write_report(const Report& r, const std::string& dir, const std::string& stem);

void write_text(const std::string& path, const std::string& text);

}  // namespace edgebench::harness
