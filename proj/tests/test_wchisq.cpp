// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "seqcred/wchisq.hpp"
#include "support/stat_oracles.hpp"

using namespace seqcred;

TEST_CASE("imhof cdf matches reference values for weights (2,1,0.5)", "[wchisq]") {
  // References from independent nested quadrature of the convolution
  // P(2A + B + C/2 <= x), A,B,C iid chi-square(1) (scipy, no cf inversion).
  wchisq::Distribution dist({2.0, 1.0, 0.5});
  wchisq::ImhofInverter inv(dist);
  struct Ref {
    double x, f;
  } refs[] = {{3.5, 0.6316982115494266}, {7.0, 0.8799904007125773}, {12.0, 0.9735005696352862}};
  for (const auto& [x, f] : refs) {
    const auto got = inv.cdf(x);
    REQUIRE(got.converged);
    REQUIRE(got.value == Catch::Approx(f).epsilon(1e-8));
  }
}

TEST_CASE("imhof cdf matches chi-square for equal weights", "[wchisq]") {
  // k weights of 1 give a chi-square(k); exponential closed form at k = 2.
  wchisq::Distribution dist({1.0, 1.0});
  wchisq::ImhofInverter inv(dist);
  for (const double x : {0.5, 1.0, 2.0, 5.0, 9.0}) {
    const auto got = inv.cdf(x);
    REQUIRE(got.converged);
    REQUIRE(got.value == Catch::Approx(1.0 - std::exp(-x / 2.0)).epsilon(1e-9));
  }
}

TEST_CASE("imhof quantile recovers chi-square quantiles", "[wchisq]") {
  {
    wchisq::Distribution dist({1.0});
    wchisq::ImhofInverter inv(dist);
    const auto q95 = inv.quantile(0.95);
    REQUIRE(q95.converged);
    REQUIRE(q95.value == Catch::Approx(3.841458820694124).epsilon(1e-7));
  }
  {
    std::vector<double> w(10, 1.0);
    wchisq::Distribution dist(w);
    wchisq::ImhofInverter inv(dist);
    const auto median = inv.quantile(0.5);
    REQUIRE(median.converged);
    REQUIRE(median.value == Catch::Approx(9.34181776559197).epsilon(1e-7));
  }
}

TEST_CASE("imhof quantile agrees with the test-side gamma oracle", "[wchisq]") {
  // chi-square(k) quantiles from the incomplete-gamma inversion oracle
  for (const int k : {1, 2, 5, 20}) {
    std::vector<double> w(static_cast<std::size_t>(k), 1.0);
    wchisq::ImhofInverter inv{wchisq::Distribution(w)};
    for (const double p : {0.05, 0.5, 0.95, 0.99}) {
      const auto got = inv.quantile(p);
      REQUIRE(got.converged);
      REQUIRE(got.value == Catch::Approx(test_oracle::chi_square_quantile(p, k)).epsilon(1e-7));
    }
  }
}

TEST_CASE("quantile handles scaled single weight across gamma range", "[wchisq]") {
  const double w1 = 1.0 / 101.0;
  wchisq::Distribution dist({w1});
  wchisq::ImhofInverter inv(dist);
  double prev = 1e300;
  for (double p = 0.99; p > 0.005; p -= 0.01) {
    const auto q = inv.quantile(p);
    REQUIRE(q.converged);
    REQUIRE(q.value == Catch::Approx(w1 * test_oracle::chi_square_quantile(p, 1)).epsilon(1e-6));
    REQUIRE(q.value < prev);
    prev = q.value;
  }
}

TEST_CASE("cdf is monotone and bounded on a decaying weight vector", "[wchisq]") {
  std::vector<double> w(200);
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::pow(static_cast<double>(i + 1), -2.0);
  }
  wchisq::Distribution dist(w);
  wchisq::ImhofInverter inv(dist);
  double prev = -1.0;
  for (double x = 0.1; x < 8.0; x += 0.35) {
    const auto f = inv.cdf(x);
    REQUIRE(f.converged);
    REQUIRE(f.value >= prev - 1e-10);
    REQUIRE(f.value <= 1.0);
    prev = f.value;
  }
  REQUIRE(prev > 0.99);
}
