#include "edgebench/harness/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>

namespace edgebench::harness {

MetricsSummary summarize(const std::vector<double>& values) {
  if (values.empty()) throw EmptySeries();
  std::vector<double> v = values;
  std::sort(v.begin(), v.end());
  MetricsSummary s;
  s.n = v.size();
  s.min = v.front();
  s.max = v.back();
  const std::size_t mid = s.n / 2;
  s.median = s.n % 2 ? v[mid] : (v[mid - 1] + v[mid]) / 2;

  // Extended precision keeps the mean accurate when large values cancel.
  long double sum = 0;
  for (double x : values) sum += x;
  s.mean = static_cast<double>(sum / s.n);
  if (s.n < 2) {
    s.std_corrected = std::numeric_limits<double>::quiet_NaN();
  } else {
    long double ss = 0;
    for (double x : values) ss += (x - static_cast<long double>(s.mean)) * (x - static_cast<long double>(s.mean));
    s.std_corrected = static_cast<double>(std::sqrt(ss / (s.n - 1)));
  }
  s.ecdf = ecdf(values);
  return s;
}

std::vector<EcdfPoint> ecdf(const std::vector<double>& values) {
  if (values.empty()) throw EmptySeries();
  std::vector<double> v = values;
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  std::vector<EcdfPoint> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i + 1 < v.size() && v[i + 1] == v[i]) continue;
    out.push_back({v[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

double fraction_below(const std::vector<double>& values, double threshold) {
  if (values.empty()) throw EmptySeries();
  const auto k = std::count_if(values.begin(), values.end(), [&](double x) { return x < threshold; });
  return static_cast<double>(k) / static_cast<double>(values.size());
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw EmptySeries();
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size()));
  const std::size_t idx = rank < 1 ? 0 : static_cast<std::size_t>(rank) - 1;
  return values[std::min(idx, values.size() - 1)];
}

SlopeTest slope_test(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("slope_test: x and y differ in length");
  if (x.size() < 3) throw std::invalid_argument("slope_test: need at least three points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) throw std::invalid_argument("slope_test: x values are all equal");

  SlopeTest r;
  r.n = x.size();
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (r.intercept + r.slope * x[i]);
    sse += e * e;
  }
  const double df = n - 2;
  const double se = std::sqrt(sse / df / sxx);
  if (se == 0) {
    r.t_statistic = r.slope == 0 ? 0 : std::copysign(std::numeric_limits<double>::infinity(), r.slope);
    r.p_value = r.slope == 0 ? 1 : 0;
    return r;
  }
  r.t_statistic = r.slope / se;
  boost::math::students_t dist(df);
  r.p_value = 2 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t_statistic)));
  return r;
}

}  // namespace edgebench::harness
