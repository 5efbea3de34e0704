// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "seqcred/errors.hpp"
#include "seqcred/model.hpp"

namespace seqcred {

/// Hyperparameters of the prior  Pi_{alpha,tau} = (x)_i N(0, tau^2 i^{-1-2 alpha}).
struct PriorParams {
  double alpha = 1.0;
  double tau = 1.0;

  void validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
      throw ConfigError("PriorParams: alpha must be finite and >= 0");
    }
    if (!(tau > 0.0) || !std::isfinite(tau)) {
      throw ConfigError("PriorParams: tau must be finite and > 0");
    }
  }
};

namespace detail {

/// Log marginal likelihood on a geometric grid of signal-to-noise profiles.
///
/// Coordinate i at grid point j has signal-to-noise lambda_ij =
/// lambda0[i] * step_i^j (step per-coordinate, or one shared value), and
///
///   l_j = -1/2 [ dim*ln(2 pi / n) + sum_i ( ln(1+lambda_ij) + n x_i^2/(1+lambda_ij) ) ].
///
/// The lambda recurrence replaces a per-cell exp; the log sum is carried as a
/// running product with periodic exponent extraction so it cannot overflow.
/// Coordinates are processed in lanes of four to keep the recurrences off the
/// multiplier's latency chain.
inline std::vector<double> marginal_profile_core(std::span<const double> x, double n,
                                                 std::span<const double> lambda0,
                                                 std::span<const double> step,
                                                 std::size_t count) {
  const std::size_t dim = x.size();
  const bool shared_step = step.size() == 1;
  std::vector<double> sum_quad(count, 0.0);   // sum_i n x_i^2 / (1+lambda)
  std::vector<double> log_prod(count, 0.0);   // log sum via product + exponents
  std::vector<double> prod(count, 1.0);
  std::vector<long long> prod_exp(count, 0);

  const auto flush_exponents = [&] {
    for (std::size_t j = 0; j < count; ++j) {
      int e = 0;
      prod[j] = std::frexp(prod[j], &e);
      prod_exp[j] += e;
      if (prod[j] == 0.0) throw NumericError("marginal_profile_core: product underflow");
    }
  };

  std::size_t i = 0;
  for (; i + 4 <= dim; i += 4) {
    double l0 = lambda0[i], l1 = lambda0[i + 1], l2 = lambda0[i + 2], l3 = lambda0[i + 3];
    const double g0 = shared_step ? step[0] : step[i];
    const double g1 = shared_step ? step[0] : step[i + 1];
    const double g2 = shared_step ? step[0] : step[i + 2];
    const double g3 = shared_step ? step[0] : step[i + 3];
    const double q0 = n * x[i] * x[i], q1 = n * x[i + 1] * x[i + 1];
    const double q2 = n * x[i + 2] * x[i + 2], q3 = n * x[i + 3] * x[i + 3];
    for (std::size_t j = 0; j < count; ++j) {
      const double w0 = 1.0 + l0, w1 = 1.0 + l1, w2 = 1.0 + l2, w3 = 1.0 + l3;
      sum_quad[j] += (q0 / w0 + q1 / w1) + (q2 / w2 + q3 / w3);
      prod[j] *= (w0 * w1) * (w2 * w3);
      l0 *= g0;
      l1 *= g1;
      l2 *= g2;
      l3 *= g3;
    }
    if (((i >> 2) & 3u) == 3u) flush_exponents();  // every 16 coordinates
  }
  for (; i < dim; ++i) {
    double l = lambda0[i];
    const double g = shared_step ? step[0] : step[i];
    const double q = n * x[i] * x[i];
    for (std::size_t j = 0; j < count; ++j) {
      const double w = 1.0 + l;
      sum_quad[j] += q / w;
      prod[j] *= w;
      l *= g;
    }
    flush_exponents();
  }
  flush_exponents();

  constexpr double kLn2 = std::numbers::ln2;
  const double base = static_cast<double>(dim) * std::log(2.0 * std::numbers::pi / n);
  std::vector<double> out(count);
  for (std::size_t j = 0; j < count; ++j) {
    log_prod[j] = std::log(prod[j]) + static_cast<double>(prod_exp[j]) * kLn2;
    out[j] = -0.5 * (base + log_prod[j] + sum_quad[j]);
  }
  return out;
}

/// lambda0 for prior (alpha, tau): lambda_i = n tau^2 exp(-(1+2 alpha+2p) ln i).
inline std::vector<double> lambda_at(const Observation& obs, double alpha, double tau) {
  const std::size_t dim = obs.config.dim;
  const double c = 1.0 + 2.0 * alpha + 2.0 * obs.config.p;
  const double amp = static_cast<double>(obs.config.n) * tau * tau;
  std::vector<double> lambda(dim);
  for (std::size_t i = 1; i <= dim; ++i) {
    lambda[i - 1] = amp * std::exp(-c * std::log(static_cast<double>(i)));
  }
  return lambda;
}

inline void check_finite(const Observation& obs) {
  for (double v : obs.x) {
    if (!std::isfinite(v)) throw NumericError("observation contains non-finite values");
  }
}

}  // namespace detail

/// Exact conjugate posterior for a fixed prior (alpha, tau):
///   with t_i = tau^2 i^{-1-2 alpha} and kappa_i = i^{-p},
///   var_i  = t_i / (1 + n kappa_i^2 t_i)
///   mean_i = n kappa_i t_i x_i / (1 + n kappa_i^2 t_i)
///   log_marginal = -1/2 sum_i [ ln(2 pi v_i) + x_i^2 / v_i ],  v_i = kappa_i^2 t_i + 1/n.
/// prior_tail_bound carries tau^2 D^{-2 alpha}/(2 alpha), the bound on the
/// prior mass dropped by truncating the product at D (infinite for alpha = 0).
struct ConjugatePosterior {
  std::vector<double> mean;
  std::vector<double> var;
  double log_marginal = 0.0;
  double prior_tail_bound = std::numeric_limits<double>::infinity();
  PriorParams params;
  ModelConfig config;

  double sum_var() const {
    double s = 0.0;
    for (double v : var) s += v;
    return s;
  }
};

inline ConjugatePosterior fit_posterior(const Observation& obs, const PriorParams& params) {
  params.validate();
  obs.config.validate();
  detail::check_finite(obs);
  const std::size_t dim = obs.config.dim;
  const double n = static_cast<double>(obs.config.n);
  const double tau2 = params.tau * params.tau;
  const double prior_decay = 1.0 + 2.0 * params.alpha;

  ConjugatePosterior post;
  post.params = params;
  post.config = obs.config;
  post.mean.resize(dim);
  post.var.resize(dim);
  for (std::size_t i = 1; i <= dim; ++i) {
    const double log_i = std::log(static_cast<double>(i));
    const double t = tau2 * std::exp(-prior_decay * log_i);
    const double kappa = obs.config.kappa(i);
    const double denom = 1.0 + n * kappa * kappa * t;
    post.var[i - 1] = t / denom;
    post.mean[i - 1] = n * kappa * t * obs.x[i - 1] / denom;
  }
  const auto lambda0 = detail::lambda_at(obs, params.alpha, params.tau);
  const double one = 1.0;
  post.log_marginal =
      detail::marginal_profile_core(obs.x, n, lambda0, std::span<const double>(&one, 1), 1)[0];
  if (params.alpha > 0.0) {
    post.prior_tail_bound =
        tau2 * std::exp(-2.0 * params.alpha * std::log(static_cast<double>(dim))) /
        (2.0 * params.alpha);
  }
  return post;
}

/// Log marginal likelihood along an increasing alpha grid at fixed tau,
/// without materializing posteriors. Uniform grids use the geometric
/// recurrence fast path; arbitrary grids fall back to per-point evaluation.
inline std::vector<double> log_marginal_profile(const Observation& obs,
                                                std::span<const double> alphas, double tau) {
  if (alphas.empty()) throw UsageError("log_marginal_profile: empty grid");
  for (std::size_t k = 1; k < alphas.size(); ++k) {
    if (!(alphas[k] > alphas[k - 1])) {
      throw UsageError("log_marginal_profile: grid must be strictly increasing");
    }
  }
  detail::check_finite(obs);
  const double n = static_cast<double>(obs.config.n);
  const std::size_t count = alphas.size();

  bool uniform = true;
  const double h = count > 1 ? (alphas[count - 1] - alphas[0]) / static_cast<double>(count - 1) : 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const double expected = alphas[0] + h * static_cast<double>(k);
    if (std::abs(alphas[k] - expected) > 1e-9 * std::max(1.0, std::abs(expected))) {
      uniform = false;
      break;
    }
  }

  if (uniform) {
    const auto lambda0 = detail::lambda_at(obs, alphas[0], tau);
    if (count == 1) {
      const double one = 1.0;
      return detail::marginal_profile_core(obs.x, n, lambda0,
                                           std::span<const double>(&one, 1), 1);
    }
    std::vector<double> step(obs.config.dim);
    for (std::size_t i = 1; i <= obs.config.dim; ++i) {
      step[i - 1] = std::exp(-2.0 * h * std::log(static_cast<double>(i)));
    }
    return detail::marginal_profile_core(obs.x, n, lambda0, step, count);
  }

  std::vector<double> out(count);
  const double one = 1.0;
  for (std::size_t k = 0; k < count; ++k) {
    const auto lambda0 = detail::lambda_at(obs, alphas[k], tau);
    out[k] = detail::marginal_profile_core(obs.x, n, lambda0,
                                           std::span<const double>(&one, 1), 1)[0];
  }
  return out;
}

/// Log marginal likelihood along a geometric tau grid at fixed alpha
/// (tau_j = tau0 * ratio^j). Shares the recurrence kernel: the per-grid-step
/// multiplier is the scalar ratio^2.
inline std::vector<double> log_marginal_profile_tau(const Observation& obs, double alpha,
                                                    double tau0, double ratio,
                                                    std::size_t count) {
  if (count == 0) throw UsageError("log_marginal_profile_tau: empty grid");
  if (!(tau0 > 0.0) || !(ratio > 0.0)) {
    throw UsageError("log_marginal_profile_tau: tau0 and ratio must be > 0");
  }
  detail::check_finite(obs);
  const auto lambda0 = detail::lambda_at(obs, alpha, tau0);
  const double step = ratio * ratio;
  return detail::marginal_profile_core(obs.x, static_cast<double>(obs.config.n), lambda0,
                                       std::span<const double>(&step, 1), count);
}

}  // namespace seqcred
