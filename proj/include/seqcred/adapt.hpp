// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqcred/conjugate.hpp"
#include "seqcred/errors.hpp"
#include "seqcred/model.hpp"
#include "seqcred/rng.hpp"

namespace seqcred {

/// Hyperprior density on the regularity parameter over (0, A]:
///   lambda(a) = c5                        for 0 < a <= c1
///   lambda(a) = c4 a^{-c3} exp(-c2 a)     for c1 < a <= A
/// c3 > 1 is required when c2 = 0 (so the unbounded-support version stays
/// integrable). hb_posterior renormalizes numerically, so c4/c5 need not make
/// lambda integrate to one.
struct HyperPrior {
  double c1 = 1.0;
  double c2 = 1.0;
  double c3 = 0.0;
  double c4 = 1.0;
  double c5 = 1.0;
  double A = 1.0;

  void validate() const {
    if (!(A > 0.0)) throw ConfigError("HyperPrior: A must be > 0");
    if (!(c1 >= 0.0) || !(c2 >= 0.0)) throw ConfigError("HyperPrior: c1, c2 must be >= 0");
    if (!(c4 > 0.0) || !(c5 > 0.0)) throw ConfigError("HyperPrior: c4, c5 must be > 0");
    if (c2 == 0.0 && !(c3 > 1.0)) {
      throw ConfigError("HyperPrior: c3 must exceed 1 when c2 = 0");
    }
  }

  double log_density(double a) const {
    if (!(a > 0.0) || a > A) return -std::numeric_limits<double>::infinity();
    if (a <= c1) return std::log(c5);
    return std::log(c4) - c3 * std::log(a) - c2 * a;
  }

  /// Default family member on (0, A]: flat to 1, exponential beyond, joined
  /// continuously and normalized in closed form.
  static HyperPrior defaults_for(double bound) {
    if (!(bound > 0.0)) throw ConfigError("HyperPrior: A must be > 0");
    HyperPrior prior;
    prior.A = bound;
    prior.c1 = 1.0;
    prior.c2 = 1.0;
    prior.c3 = 0.0;
    const double e1 = std::exp(-1.0);
    const double mass_unit_c4 =
        bound <= 1.0 ? bound * e1 : e1 + (e1 - std::exp(-bound));
    prior.c4 = 1.0 / mass_unit_c4;
    prior.c5 = prior.c4 * e1;
    prior.validate();
    return prior;
  }
};

/// Result of a 1-D marginal likelihood maximization. trace records every
/// (hyperparameter, objective) evaluation the optimizer made.
struct EbResult {
  double value = 0.0;
  double objective = -std::numeric_limits<double>::infinity();
  bool at_boundary = false;
  std::vector<std::pair<double, double>> trace;
};

namespace detail {

/// Golden-section maximization on [lo, hi], returning the best point ever
/// evaluated (never worse than the seeded candidates). Ties prefer the
/// smaller argument.
template <typename F>
std::pair<double, double> golden_max(F&& f, double lo, double hi, double tol,
                                     std::pair<double, double> best) {
  constexpr double kInvPhi = 0.6180339887498949;
  const auto consider = [&best](double arg, double val) {
    if (val > best.second || (val == best.second && arg < best.first)) best = {arg, val};
  };
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  consider(x1, f1);
  consider(x2, f2);
  while (hi - lo > tol) {
    if (f1 >= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = f(x1);
      consider(x1, f1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = f(x2);
      consider(x2, f2);
    }
  }
  return best;
}

inline std::size_t argmax_prefer_left(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[best]) best = k;
  }
  return best;
}

}  // namespace detail

/// Marginal maximum likelihood for alpha on [0, A]: coarse grid of step at
/// most 0.01, then golden-section refinement of the bracketing cell to width
/// tol. Ties break toward the smaller alpha.
inline EbResult eb_alpha(const Observation& obs, double bound, double tol) {
  if (!(bound > 0.0)) throw UsageError("eb_alpha: bound must be > 0");
  if (!(tol > 0.0)) throw UsageError("eb_alpha: tol must be > 0");
  const auto cells = static_cast<std::size_t>(std::ceil(bound / 0.01));
  const std::size_t points = cells + 1;
  std::vector<double> grid(points);
  for (std::size_t k = 0; k < points; ++k) {
    grid[k] = bound * static_cast<double>(k) / static_cast<double>(cells);
  }
  const auto profile = log_marginal_profile(obs, grid, 1.0);

  EbResult result;
  result.trace.reserve(points + 64);
  for (std::size_t k = 0; k < points; ++k) result.trace.emplace_back(grid[k], profile[k]);

  const std::size_t best = detail::argmax_prefer_left(profile);
  const double lo = grid[best == 0 ? 0 : best - 1];
  const double hi = grid[std::min(best + 1, points - 1)];
  const auto eval = [&](double a) {
    const double value = log_marginal_profile(obs, std::span<const double>(&a, 1), 1.0)[0];
    result.trace.emplace_back(a, value);
    return value;
  };
  auto [arg, val] =
      detail::golden_max(eval, lo, hi, tol, {grid[best], profile[best]});
  result.value = arg;
  result.objective = val;
  result.at_boundary = arg <= tol || arg >= bound - tol;
  return result;
}

/// Marginal maximum likelihood for tau at fixed alpha, over [lo, hi] on a log
/// scale: geometric coarse grid (step <= 0.03 in log tau), then golden-section
/// on log tau to width tol. Conventions as in eb_alpha.
inline EbResult eb_tau(const Observation& obs, double alpha, double tau_lo, double tau_hi,
                       double tol) {
  if (!(tau_lo > 0.0) || !(tau_hi > tau_lo)) {
    throw UsageError("eb_tau: bounds must satisfy 0 < lo < hi");
  }
  if (!(tol > 0.0)) throw UsageError("eb_tau: tol must be > 0");
  const double log_lo = std::log(tau_lo);
  const double log_hi = std::log(tau_hi);
  const auto cells =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((log_hi - log_lo) / 0.03)));
  const std::size_t points = cells + 1;
  const double step = (log_hi - log_lo) / static_cast<double>(cells);
  const auto profile =
      log_marginal_profile_tau(obs, alpha, tau_lo, std::exp(step), points);

  EbResult result;
  result.trace.reserve(points + 64);
  std::vector<double> grid(points);
  for (std::size_t k = 0; k < points; ++k) {
    grid[k] = std::exp(log_lo + step * static_cast<double>(k));
    result.trace.emplace_back(grid[k], profile[k]);
  }

  const std::size_t best = detail::argmax_prefer_left(profile);
  const double blo = log_lo + step * static_cast<double>(best == 0 ? 0 : best - 1);
  const double bhi = log_lo + step * static_cast<double>(std::min(best + 1, points - 1));
  const auto eval = [&](double log_tau) {
    const double tau = std::exp(log_tau);
    const double value = log_marginal_profile_tau(obs, alpha, tau, 1.0, 1)[0];
    result.trace.emplace_back(tau, value);
    return value;
  };
  auto [arg, val] = detail::golden_max(eval, blo, bhi, tol,
                                       {log_lo + step * static_cast<double>(best), profile[best]});
  result.value = std::exp(arg);
  result.objective = val;
  result.at_boundary = arg <= log_lo + tol || arg >= log_hi - tol;
  return result;
}

/// Hierarchical Bayes posterior over the alpha grid: a weighted mixture of
/// conjugate posteriors with weights
///   w_j ~ lambda(alpha_j) exp(l(alpha_j)) Delta_j
/// on the midpoint grid of (0, A], log-sum-exp normalized. Components with
/// weight below kComponentFloor keep their weight entry but are not
/// materialized (their contribution is below double noise everywhere).
struct HbPosterior {
  static constexpr double kComponentFloor = 1e-15;

  std::vector<double> grid;
  std::vector<double> weights;
  std::vector<std::optional<ConjugatePosterior>> components;
  std::vector<double> mean;
  double mean_alpha = 0.0;
  ModelConfig config;

  std::size_t dim() const { return mean.size(); }
};

inline HbPosterior hb_posterior(const Observation& obs, const HyperPrior& hyper,
                                std::size_t grid_size) {
  hyper.validate();
  if (grid_size < 1) throw UsageError("hb_posterior: grid_size must be >= 1");
  obs.config.validate();

  HbPosterior post;
  post.config = obs.config;
  const double cell = hyper.A / static_cast<double>(grid_size);
  post.grid.resize(grid_size);
  for (std::size_t j = 0; j < grid_size; ++j) {
    post.grid[j] = (static_cast<double>(j) + 0.5) * cell;
  }
  const auto profile = log_marginal_profile(obs, post.grid, 1.0);

  std::vector<double> log_w(grid_size);
  double max_log_w = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < grid_size; ++j) {
    log_w[j] = hyper.log_density(post.grid[j]) + profile[j] + std::log(cell);
    max_log_w = std::max(max_log_w, log_w[j]);
  }
  if (!std::isfinite(max_log_w)) {
    throw NumericError("hb_posterior: all mixture weights underflowed (max log weight " +
                       std::to_string(max_log_w) + ")");
  }
  post.weights.resize(grid_size);
  double total = 0.0;
  for (std::size_t j = 0; j < grid_size; ++j) {
    post.weights[j] = std::exp(log_w[j] - max_log_w);
    total += post.weights[j];
  }
  for (auto& w : post.weights) w /= total;

  post.components.resize(grid_size);
  post.mean.assign(obs.config.dim, 0.0);
  post.mean_alpha = 0.0;
  for (std::size_t j = 0; j < grid_size; ++j) {
    post.mean_alpha += post.weights[j] * post.grid[j];
    if (post.weights[j] < HbPosterior::kComponentFloor) continue;
    post.components[j] = fit_posterior(obs, PriorParams{post.grid[j], 1.0});
    const auto& component_mean = post.components[j]->mean;
    for (std::size_t i = 0; i < component_mean.size(); ++i) {
      post.mean[i] += post.weights[j] * component_mean[i];
    }
  }
  return post;
}

namespace detail {

/// Materialized component index by cumulative weight (restricted to
/// materialized components, whose total mass is 1 up to kComponentFloor dust).
inline std::vector<std::pair<double, std::size_t>> component_cdf(const HbPosterior& post) {
  std::vector<std::pair<double, std::size_t>> cdf;
  double acc = 0.0;
  for (std::size_t j = 0; j < post.weights.size(); ++j) {
    if (!post.components[j]) continue;
    acc += post.weights[j];
    cdf.emplace_back(acc, j);
  }
  if (cdf.empty()) throw NumericError("hb posterior has no materialized components");
  for (auto& [mass, index] : cdf) mass /= acc;
  cdf.back().first = 1.0;
  return cdf;
}

inline std::size_t pick_component(const std::vector<std::pair<double, std::size_t>>& cdf,
                                  double u) {
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), u,
                                   [](const auto& entry, double v) { return entry.first < v; });
  return (it == cdf.end() ? cdf.back() : *it).second;
}

}  // namespace detail

/// count draws from the mixture posterior as a row-major count x dim matrix.
/// Each draw consumes one uniform (component pick) and dim normals, so the
/// stream layout is stable and seeded runs are reproducible.
struct DrawMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }
};

inline DrawMatrix hb_sample(const HbPosterior& post, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw UsageError("hb_sample: count must be >= 1");
  const std::size_t dim = post.dim();
  if (count > (1ull << 31) / std::max<std::size_t>(dim, 1)) {
    throw ConfigError("hb_sample: requested draw matrix too large; stream draws instead");
  }
  const auto cdf = detail::component_cdf(post);
  DrawMatrix draws;
  draws.rows = count;
  draws.cols = dim;
  draws.values.resize(count * dim);
  FastNormal rng(seed);
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t j = detail::pick_component(cdf, rng.engine().uniform01());
    const auto& comp = *post.components[j];
    double* out = draws.values.data() + r * dim;
    for (std::size_t i = 0; i < dim; ++i) {
      out[i] = comp.mean[i] + std::sqrt(comp.var[i]) * rng.next();
    }
  }
  return draws;
}

/// Slowly varying upper bound for the hyperparameter range,
/// sqrt(log n) / (4 sqrt(max(log rho, 1))).
inline double default_alpha_bound(std::uint64_t n, double rho) {
  const double log_n = std::log(static_cast<double>(std::max<std::uint64_t>(n, 2)));
  return std::sqrt(log_n) / (4.0 * std::sqrt(std::max(std::log(rho), 1.0)));
}

}  // namespace seqcred
