#include <cmath>
#include <random>

#include "doctest.h"
#include "edgebench/harness/stats.hpp"
#include "stats_oracle.hpp"

using namespace edgebench::harness;

TEST_CASE("summary of small series") {
  auto s = summarize({1, 2, 3});
  CHECK(s.n == 3);
  CHECK(s.mean == 2);
  CHECK(s.median == 2);
  CHECK(s.min == 1);
  CHECK(s.max == 3);
  CHECK(summarize({2, 4}).std_corrected == doctest::Approx(std::sqrt(2.0)));
  CHECK(summarize({4, 1, 3, 2}).median == 2.5);
  CHECK(std::isnan(summarize({5}).std_corrected));
  CHECK_THROWS_AS(summarize({}), EmptySeries);
  CHECK_THROWS_AS(ecdf({}), EmptySeries);
}

TEST_CASE("ecdf steps") {
  auto e = ecdf({5, 1, 3});
  REQUIRE(e.size() == 3);
  CHECK(e[1].value == 3);
  CHECK(e[1].fraction == doctest::Approx(2.0 / 3));
  CHECK(e.back().fraction == 1.0);
  auto flat = ecdf({7, 7, 7});
  REQUIRE(flat.size() == 1);
  CHECK(flat[0] == EcdfPoint{7, 1.0});
}

TEST_CASE("fractions and percentiles") {
  CHECK(fraction_below({90, 99, 100, 120}, 100) == 0.5);
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  CHECK(percentile(v, 95) == 95);
  CHECK(percentile(v, 0) == 1);
  CHECK(percentile(v, 100) == 100);
}

TEST_CASE("slope test") {
  std::vector<double> x{1, 2, 3, 4, 5, 6}, y;
  for (double xi : x) y.push_back(3 * xi + 1);
  y[2] += 0.01;
  auto t = slope_test(x, y);
  CHECK(t.slope == doctest::Approx(3).epsilon(1e-3));
  CHECK(t.intercept == doctest::Approx(1).epsilon(1e-2));
  CHECK(t.p_value < 1e-6);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(50, 2);
  std::vector<double> xs, ys;
  for (int i = 0; i < 12; ++i) {
    xs.push_back(i);
    ys.push_back(noise(rng));
  }
  CHECK(slope_test(xs, ys).p_value > 0.05);
  CHECK_THROWS(slope_test({1, 1, 1}, {1, 2, 3}));
  CHECK_THROWS(slope_test({1, 2}, {1, 2}));
}

TEST_CASE("summary matches the reference on random series") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 200; ++i) {
    const auto v = oracle::random_series(rng);
    CHECK(oracle::compare(v) == "");
  }
}
