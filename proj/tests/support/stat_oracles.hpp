// SPDX-License-Identifier: Apache-2.0
// Test-side statistical oracles, independent of the library's numerics:
// regularized incomplete gamma by series/continued fraction and quantile
// inversion by bisection. Checked against frozen scipy values in test_wchisq.
#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace test_oracle {

inline double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 10000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

/// Regularized lower incomplete gamma P(a, x).
inline double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p domain");
  if (x == 0.0) return 0.0;
  return x < a + 1.0 ? gamma_p_series(a, x) : 1.0 - gamma_q_contfrac(a, x);
}

/// chi-square(k) CDF at x.
inline double chi_square_cdf(double x, double k) { return gamma_p(0.5 * k, 0.5 * x); }

/// chi-square(k) p-quantile by bisection on the CDF.
inline double chi_square_quantile(double p, double k) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile domain");
  double lo = 0.0;
  double hi = k + 10.0 * std::sqrt(2.0 * k) + 10.0;
  while (chi_square_cdf(hi, k) < p) hi *= 2.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (chi_square_cdf(mid, k) >= p ? hi : lo) = mid;
    if (hi - lo <= 1e-13 * std::max(hi, 1.0)) break;
  }
  return 0.5 * (lo + hi);
}

/// Standard normal quantile by bisection on erfc.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile domain");
  double lo = -40.0, hi = 40.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double cdf = 0.5 * std::erfc(-mid / std::sqrt(2.0));
    (cdf >= p ? hi : lo) = mid;
    if (hi - lo <= 1e-13) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace test_oracle
