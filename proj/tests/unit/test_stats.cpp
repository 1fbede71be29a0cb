#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <doctest.h>

#include "oracles.hpp"
#include "radfuse/common.hpp"
#include "radfuse/stats.hpp"
#include "test_util.hpp"

using radfuse::compute_stats;

TEST_SUITE("stats") {
  TEST_CASE("constant vector conventions") {
    const std::vector<double> p{5, 5, 5};
    const auto s = compute_stats(p);
    CHECK(s.std == 0.0);
    CHECK(s.skewness == 0.0);
    CHECK(s.kurtosis == 0.0);
    CHECK(s.entropy == 0.0);
    CHECK_FALSE(std::signbit(s.entropy));
    CHECK(s.uniformity == 1.0);
    CHECK(s.area == 15.0);
    CHECK(s.energy == 75.0);
  }

  TEST_CASE("hand-computed 1..4") {
    const std::vector<double> p{1, 2, 3, 4};
    const auto s = compute_stats(p);
    CHECK(s.energy == 30.0);
    CHECK(s.area == 10.0);
    CHECK(s.mean == 2.5);
    CHECK(s.entropy == doctest::Approx(2.0));
    CHECK(s.uniformity == doctest::Approx(0.25));
    CHECK(s.mad == 1.0);
    CHECK(s.skewness == doctest::Approx(0.0));
    CHECK(s.kurtosis == doctest::Approx(-1.36));
    CHECK(s.median == 2.5);
    CHECK(s.min == 1.0);
    CHECK(s.max == 4.0);
    CHECK(s.range == 3.0);
    CHECK(s.rms == doctest::Approx(std::sqrt(7.5)));
  }

  TEST_CASE("unique-value frequencies") {
    const std::vector<double> p{1, 1, 2, 2};
    const auto s = compute_stats(p);
    CHECK(s.entropy == doctest::Approx(1.0));
    CHECK(s.uniformity == doctest::Approx(0.5));
  }

  TEST_CASE("odd-length median and single element") {
    CHECK(compute_stats(std::vector<double>{3, 1, 2}).median == 2.0);
    const auto s = compute_stats(std::vector<double>{-4});
    CHECK(s.median == -4.0);
    CHECK(s.uniformity == 1.0);
    CHECK(s.std == 0.0);
  }

  TEST_CASE("invalid input") {
    CHECK_THROWS_AS(compute_stats(std::vector<double>{}), radfuse::Error);
    CHECK_THROWS_AS(compute_stats(std::vector<double>{1.0, std::numeric_limits<double>::quiet_NaN()}),
                    radfuse::Error);
    CHECK_THROWS_AS(compute_stats(std::vector<double>{std::numeric_limits<double>::infinity()}), radfuse::Error);
  }

  TEST_CASE("matches brute-force oracle") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 60; ++trial) {
      const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 3000)(rng);
      std::vector<double> p(n);
      if (trial % 3 == 0) {
        std::uniform_int_distribution<int> d(0, 9);
        for (auto& v : p) v = d(rng);
      } else {
        std::normal_distribution<double> d(trial, 1.0 + trial);
        for (auto& v : p) v = d(rng);
      }
      const auto got = compute_stats(p).to_array();
      const auto want = oracle::brute_stats(p);
      for (std::size_t k = 0; k < got.size(); ++k) {
        INFO("trial " << trial << " stat " << radfuse::kStatNames[k]);
        CHECK(testutil::rel_err(got[k], want[k]) <= 1e-9);
      }
    }
  }

  TEST_CASE("invariants: permutation, shift, scale") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> d(0, 30);
    std::vector<double> p(500);
    for (auto& v : p) v = d(rng) * 0.5;
    const auto base = compute_stats(p);

    auto shuffled = p;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto perm = compute_stats(shuffled).to_array();
    const auto b = base.to_array();
    for (std::size_t k = 0; k < b.size(); ++k) CHECK(testutil::rel_err(perm[k], b[k]) <= 1e-12);

    auto shifted = p;
    for (auto& v : shifted) v += 7.0;
    const auto sh = compute_stats(shifted);
    CHECK(sh.mean == doctest::Approx(base.mean + 7));
    CHECK(sh.median == doctest::Approx(base.median + 7));
    CHECK(sh.min == doctest::Approx(base.min + 7));
    CHECK(sh.max == doctest::Approx(base.max + 7));
    CHECK(sh.std == doctest::Approx(base.std));
    CHECK(sh.skewness == doctest::Approx(base.skewness));
    CHECK(sh.kurtosis == doctest::Approx(base.kurtosis));
    CHECK(sh.mad == doctest::Approx(base.mad));
    CHECK(sh.range == doctest::Approx(base.range));
    CHECK(sh.entropy == doctest::Approx(base.entropy));
    CHECK(sh.uniformity == doctest::Approx(base.uniformity));

    auto scaled = p;
    for (auto& v : scaled) v *= 3.0;
    const auto sc = compute_stats(scaled);
    CHECK(sc.std == doctest::Approx(3 * base.std));
    CHECK(sc.mad == doctest::Approx(3 * base.mad));
    CHECK(sc.range == doctest::Approx(3 * base.range));
    CHECK(sc.energy == doctest::Approx(9 * base.energy));
    CHECK(sc.skewness == doctest::Approx(base.skewness));
    CHECK(sc.kurtosis == doctest::Approx(base.kurtosis));
    CHECK(sc.entropy == doctest::Approx(base.entropy));
    CHECK(sc.uniformity == doctest::Approx(base.uniformity));
  }

  TEST_CASE("bounds") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> d;
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> p(1 + trial * 17);
      for (auto& v : p) v = std::round(d(rng) * 4);
      const auto s = compute_stats(p);
      CHECK(s.std >= 0);
      CHECK(s.energy >= 0);
      CHECK(s.min <= s.median);
      CHECK(s.median <= s.max);
      CHECK(s.range == s.max - s.min);
      CHECK(s.uniformity > 0);
      CHECK(s.uniformity <= 1.0 + 1e-15);
      CHECK(s.entropy >= 0);
      CHECK(s.entropy <= std::log2(static_cast<double>(p.size())) + 1e-12);
    }
  }
}
