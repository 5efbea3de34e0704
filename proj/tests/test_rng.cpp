// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "seqcred/rng.hpp"

using namespace seqcred;

// Golden values from tests/support/reference_rng.py (independent Python
// implementation of the same published algorithms).
TEST_CASE("xoshiro256++ matches the reference stream", "[rng]") {
  Xoshiro256pp eng(1);
  const std::uint64_t expected[5] = {
      14971601782005023387ULL, 13781649495232077965ULL, 1847458086238483744ULL,
      13765271635752736470ULL, 3406718355780431780ULL};
  for (const auto want : expected) REQUIRE(eng.next() == want);
}

TEST_CASE("box-muller stream matches the reference stream", "[rng]") {
  GaussianStream gauss(42);
  const double expected[6] = {-0.26860736946209501, 0.58197105186288278,
                              -0.054462170108150951, -0.17177820812195743,
                              -0.57857537684395599, -0.3575509686744035};
  for (const auto want : expected) {
    REQUIRE(gauss.next() == Catch::Approx(want).epsilon(1e-13));
  }
}

TEST_CASE("uniform01 stays in [0,1) and open variant in (0,1]", "[rng]") {
  Xoshiro256pp eng(7);
  for (int k = 0; k < 100000; ++k) {
    const double u = eng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
  Xoshiro256pp eng2(7);
  for (int k = 0; k < 100000; ++k) {
    const double u = eng2.uniform_open01();
    REQUIRE(u > 0.0);
    REQUIRE(u <= 1.0);
  }
}

TEST_CASE("fast normal sampler has standard moments and tails", "[rng]") {
  FastNormal rng(2024);
  const std::size_t count = 4'000'000;
  double sum = 0.0, sum2 = 0.0, sum3 = 0.0, sum4 = 0.0;
  std::size_t far_tail = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double z = rng.next();
    sum += z;
    sum2 += z * z;
    sum3 += z * z * z;
    sum4 += z * z * z * z;
    if (std::abs(z) > 3.442619855899) ++far_tail;
  }
  const auto m = static_cast<double>(count);
  // mean se = 1/sqrt(m) ~ 5e-4; allow 5 sigma
  REQUIRE(std::abs(sum / m) < 5.0 / std::sqrt(m));
  REQUIRE(sum2 / m == Catch::Approx(1.0).margin(5.0 * std::sqrt(2.0 / m)));
  REQUIRE(std::abs(sum3 / m) < 5.0 * std::sqrt(15.0 / m));
  REQUIRE(sum4 / m == Catch::Approx(3.0).margin(5.0 * std::sqrt(96.0 / m)));
  // P(|Z| > R) for the ziggurat tail boundary R
  const double p_tail = 2.0 * 0.5 * std::erfc(3.442619855899 / std::sqrt(2.0));
  const double se = std::sqrt(p_tail * (1.0 - p_tail) / m);
  REQUIRE(static_cast<double>(far_tail) / m == Catch::Approx(p_tail).margin(5.0 * se));
}

TEST_CASE("fast normal central quantiles match the normal cdf", "[rng]") {
  FastNormal rng(99);
  const std::size_t count = 1'000'000;
  std::size_t below_zero = 0, below_one = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double z = rng.next();
    if (z < 0.0) ++below_zero;
    if (z < 1.0) ++below_one;
  }
  const auto m = static_cast<double>(count);
  REQUIRE(below_zero / m == Catch::Approx(0.5).margin(5.0 * std::sqrt(0.25 / m)));
  const double phi1 = 0.5 * std::erfc(-1.0 / std::sqrt(2.0));
  REQUIRE(below_one / m == Catch::Approx(phi1).margin(5.0 * std::sqrt(phi1 * (1 - phi1) / m)));
}

TEST_CASE("seed derivation separates streams and replicate seeds are distinct", "[rng]") {
  REQUIRE(derive_seed(1, 2) != derive_seed(1, 3));
  REQUIRE(derive_seed(1, 2) != derive_seed(2, 2));

  std::set<std::uint64_t> seen;
  const std::uint64_t ns[] = {1000, 10000, 100000};
  for (const auto n : ns) {
    for (std::uint32_t r = 0; r < 2000; ++r) {
      seen.insert(replicate_seed(123, n, r));
    }
  }
  REQUIRE(seen.size() == 3 * 2000);
  REQUIRE_THROWS(replicate_seed(1, 5, 1u << 20));
}

TEST_CASE("streams are deterministic given the seed", "[rng]") {
  GaussianStream a(55), b(55);
  FastNormal c(55), d(55);
  for (int k = 0; k < 1000; ++k) {
    REQUIRE(a.next() == b.next());
    REQUIRE(c.next() == d.next());
  }
}
