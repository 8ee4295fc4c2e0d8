#pragma once
// Straightforward reference implementations for checking summarize/ecdf.
#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "edgebench/harness/stats.hpp"

namespace oracle {

struct Ref {
  double mean, median, min, max, std;
  std::vector<std::pair<double, double>> ecdf;
};

inline Ref reference(const std::vector<double>& v) {
  Ref r{};
  const std::size_t n = v.size();
  long double sum = 0;
  for (double x : v) sum += x;
  r.mean = static_cast<double>(sum / n);
  long double ss = 0;
  for (double x : v) ss += (x - static_cast<long double>(r.mean)) * (x - static_cast<long double>(r.mean));
  r.std = n > 1 ? static_cast<double>(std::sqrt(ss / (n - 1))) : NAN;

  // selection by counting, no sort
  auto kth = [&](std::size_t k) -> double {
    for (double c : v) {
      std::size_t less = 0, eq = 0;
      for (double x : v) less += x < c, eq += x == c;
      if (less <= k && k < less + eq) return c;
    }
    return NAN;
  };
  r.min = *std::min_element(v.begin(), v.end());
  r.max = *std::max_element(v.begin(), v.end());
  r.median = n % 2 ? kth(n / 2) : (kth(n / 2 - 1) + kth(n / 2)) / 2;

  std::vector<double> distinct;
  for (double x : v)
    if (std::find(distinct.begin(), distinct.end(), x) == distinct.end()) distinct.push_back(x);
  std::sort(distinct.begin(), distinct.end());
  for (double d : distinct) {
    std::size_t le = 0;
    for (double x : v) le += x <= d;
    r.ecdf.emplace_back(d, double(le) / n);
  }
  return r;
}

inline bool rel_close(double a, double b, double tol) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  return std::abs(a - b) <= tol * std::max({1e-300, std::abs(a), std::abs(b)}) || a == b;
}

/// Empty string when summarize/ecdf agree with the reference, else a description.
inline std::string compare(const std::vector<double>& v) {
  const auto got = edgebench::harness::summarize(v);
  const auto ref = reference(v);
  if (got.n != v.size()) return "n";
  if (got.min != ref.min || got.max != ref.max) return "min/max";
  if (got.median != ref.median) return "median";
  if (!rel_close(got.mean, ref.mean, 1e-9)) return "mean";
  if (!rel_close(got.std_corrected, ref.std, 1e-9)) return "std";
  if (got.ecdf.size() != ref.ecdf.size()) return "ecdf size";
  for (std::size_t i = 0; i < ref.ecdf.size(); ++i)
    if (got.ecdf[i].value != ref.ecdf[i].first || got.ecdf[i].fraction != ref.ecdf[i].second) return "ecdf point";
  return {};
}

/// Series with ties, negative values and widely spread magnitudes.
inline std::vector<double> random_series(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(1, 300), kind(0, 3);
  std::vector<double> v(len(rng));
  const int k = kind(rng);
  std::normal_distribution<double> gauss(80, 15);
  std::uniform_int_distribution<int> small(0, 9);
  std::exponential_distribution<double> ex(0.1);
  for (auto& x : v) {
    switch (k) {
      case 0: x = gauss(rng); break;
      case 1: x = small(rng); break;
      case 2: x = ex(rng) * (rng() % 2 ? 1 : -1); break;
      default: x = std::ldexp(gauss(rng), int(rng() % 40) - 20); break;
    }
  }
  return v;
}

}  // namespace oracle
