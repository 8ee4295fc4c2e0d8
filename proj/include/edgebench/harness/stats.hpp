#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace edgebench::harness {

class EmptySeries : public std::invalid_argument {
 public:
  EmptySeries() : std::invalid_argument("empty series") {}
};

struct EcdfPoint {
  double value = 0;
  /// Fraction of samples <= value.
  double fraction = 0;
  bool operator==(const EcdfPoint&) const = default;
};

struct MetricsSummary {
  std::size_t n = 0;
  double mean = 0, median = 0, min = 0, max = 0;
  /// n-1 denominator; NaN for a single value.
  double std_corrected = 0;
  std::vector<EcdfPoint> ecdf;
};

MetricsSummary summarize(const std::vector<double>& values);

/// One point per distinct value, sorted ascending; the last fraction is 1.
std::vector<EcdfPoint> ecdf(const std::vector<double>& values);

/// Fraction of samples strictly below `threshold`.
double fraction_below(const std::vector<double>& values, double threshold);

/// Nearest-rank percentile, p in [0, 100].
double percentile(std::vector<double> values, double p);

struct SlopeTest {
  std::size_t n = 0;
  double slope = 0;
  double intercept = 0;
  double t_statistic = 0;
  /// Two-sided p-value for slope = 0.
  double p_value = 1;
};

/// Least-squares line through (x, y) with a Student-t test on the slope.
/// Needs at least three points and two distinct x values.
SlopeTest slope_test(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace edgebench::harness
