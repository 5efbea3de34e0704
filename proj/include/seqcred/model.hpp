// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seqcred/errors.hpp"
#include "seqcred/rng.hpp"

namespace seqcred {

/// Truncated sequence observation model
///   X_i = kappa_i * theta_i + n^{-1/2} Z_i,   kappa_i = i^{-p},  i = 1..dim.
/// p = 0 is the direct problem; p > 0 a mildly ill-posed inverse problem.
struct ModelConfig {
  std::uint64_t n = 1;  // noise level 1/sqrt(n)
  double p = 0.0;       // ill-posedness degree
  std::size_t dim = 1;  // truncation dimension D

  void validate() const {
    if (n < 1) throw ConfigError("ModelConfig: n must be >= 1");
    if (!(p >= 0.0)) throw ConfigError("ModelConfig: p must be >= 0");
    if (dim < 1) throw ConfigError("ModelConfig: dim must be >= 1");
  }

  double kappa(std::size_t i) const { return std::pow(static_cast<double>(i), -p); }
  double noise_sd() const { return std::pow(static_cast<double>(n), -0.5); }
};

/// Default truncation dimension: past i ~ n^{1/(1+2a+2p)} the posterior is
/// essentially prior, so 2n coordinates keep truncation error negligible for
/// every parameter regime exercised here.
inline std::size_t default_dimension(std::uint64_t n) {
  return static_cast<std::size_t>(std::max<std::uint64_t>(2 * n, 10000));
}

enum class TruthFamily { self_similar, block_gap, sobolev_random, custom };

inline std::string_view to_string(TruthFamily family) {
  switch (family) {
    case TruthFamily::self_similar: return "self_similar";
    case TruthFamily::block_gap: return "block_gap";
    case TruthFamily::sobolev_random: return "sobolev_random";
    case TruthFamily::custom: return "custom";
  }
  throw UsageError("unknown truth family");
}

inline TruthFamily truth_family_from_string(std::string_view name) {
  if (name == "self_similar") return TruthFamily::self_similar;
  if (name == "block_gap") return TruthFamily::block_gap;
  if (name == "sobolev_random") return TruthFamily::sobolev_random;
  if (name == "custom") return TruthFamily::custom;
  throw UsageError("unknown truth family: " + std::string(name));
}

/// A coefficient sequence theta_0 with its generating family and regularity
/// tag. norm2 always holds the Euclidean norm of theta.
struct Truth {
  std::vector<double> theta;
  TruthFamily family = TruthFamily::custom;
  double beta = 0.0;
  double norm2 = 0.0;

  static Truth from_coefficients(std::vector<double> theta, TruthFamily family, double beta) {
    Truth t;
    t.theta = std::move(theta);
    t.family = family;
    t.beta = beta;
    double ss = 0.0;
    for (double v : t.theta) {
      if (!std::isfinite(v)) throw NumericError("Truth: non-finite coefficient");
      ss += v * v;
    }
    t.norm2 = std::sqrt(ss);
    return t;
  }
};

/// Parameters of the polished tail class: every window [N, rho*N] with
/// N >= N0 must carry at least a 1/L0 share of the remaining tail energy.
struct PolishedTailParams {
  double L0 = 3.0;
  std::size_t N0 = 2;
  double rho = 2.0;

  void validate() const {
    if (!(L0 >= 1.0)) throw ConfigError("PolishedTailParams: L0 must be >= 1");
    if (!(rho > 1.0)) throw ConfigError("PolishedTailParams: rho must be > 1");
    if (N0 < 1) throw ConfigError("PolishedTailParams: N0 must be >= 1");
  }
};

struct PolishedTailResult {
  bool polished = true;
  std::optional<std::size_t> first_violation;  // smallest violating N, when any
  bool vacuous = false;                        // no N in [N0, D/rho]: trivially true
};

/// Generates a truth sequence of length config.dim.
///   self_similar:    theta_i = scale * i^{-1/2-beta}
///   block_gap:       theta_i = scale * i^{-1/2-beta} on blocks [4^j, 2*4^j),
///                    zero on the intervening blocks [2*4^j, 4^{j+1})
///   sobolev_random:  theta_i = scale * i^{-1/2-beta} * u_i, u_i iid U[-1,1]
/// block_gap leaves whole windows [N, 2N] empty while energy remains further
/// out, so it sits outside the polished tail class.
inline Truth make_truth(TruthFamily family, double beta, double scale, const ModelConfig& config,
                        std::uint64_t seed = 0) {
  config.validate();
  if (!(beta >= 0.0)) throw UsageError("make_truth: beta must be >= 0");
  if (!(scale > 0.0)) throw UsageError("make_truth: scale must be > 0");
  const std::size_t dim = config.dim;
  std::vector<double> theta(dim, 0.0);
  const double decay = -0.5 - beta;
  switch (family) {
    case TruthFamily::self_similar: {
      for (std::size_t i = 1; i <= dim; ++i) {
        theta[i - 1] = scale * std::pow(static_cast<double>(i), decay);
      }
      break;
    }
    case TruthFamily::block_gap: {
      for (std::uint64_t block_start = 1; block_start <= dim; block_start *= 4) {
        const std::uint64_t block_end = std::min<std::uint64_t>(2 * block_start - 1, dim);
        for (std::uint64_t i = block_start; i <= block_end; ++i) {
          theta[i - 1] = scale * std::pow(static_cast<double>(i), decay);
        }
      }
      break;
    }
    case TruthFamily::sobolev_random: {
      Xoshiro256pp eng(seed);
      for (std::size_t i = 1; i <= dim; ++i) {
        const double u = 2.0 * eng.uniform01() - 1.0;
        theta[i - 1] = scale * std::pow(static_cast<double>(i), decay) * u;
      }
      break;
    }
    case TruthFamily::custom:
      throw UsageError("make_truth: custom truths are loaded from files, not generated");
  }
  return Truth::from_coefficients(std::move(theta), family, beta);
}

/// Checks membership in the polished tail class over the truncated range:
///   for all N in [N0, D/rho]:  sum_{i=N}^{floor(rho N)} theta_i^2
///                                >= L0^{-1} sum_{i=N}^{D} theta_i^2.
/// Zero remaining tail satisfies the constraint. If no N qualifies the test
/// is vacuous and reported as such.
inline PolishedTailResult is_polished_tail(const Truth& truth, const PolishedTailParams& params) {
  params.validate();
  const std::size_t dim = truth.theta.size();
  PolishedTailResult result;
  const auto n_max = static_cast<std::size_t>(
      std::floor(static_cast<double>(dim) / params.rho));
  if (params.N0 > n_max) {
    result.vacuous = true;
    return result;
  }
  // suffix[k] = sum_{i>=k} theta_i^2, 1-based coefficients
  std::vector<double> suffix(dim + 2, 0.0);
  for (std::size_t i = dim; i >= 1; --i) {
    const double v = truth.theta[i - 1];
    suffix[i] = suffix[i + 1] + v * v;
  }
  for (std::size_t N = params.N0; N <= n_max; ++N) {
    const double tail = suffix[N];
    if (tail == 0.0) continue;
    auto window_end = static_cast<std::size_t>(std::floor(params.rho * static_cast<double>(N)));
    window_end = std::min(window_end, dim);
    const double window = suffix[N] - suffix[window_end + 1];
    if (window < tail / params.L0) {
      result.polished = false;
      result.first_violation = N;
      return result;
    }
  }
  return result;
}

/// One realization of the observation model; regenerating with the same seed
/// reproduces x bit-exactly (GaussianStream algorithm is frozen).
struct Observation {
  std::vector<double> x;
  ModelConfig config;
  std::uint64_t seed = 0;
};

inline Observation simulate_observation(const Truth& truth, const ModelConfig& config,
                                        std::uint64_t seed) {
  config.validate();
  if (truth.theta.size() != config.dim) {
    throw ConfigError("simulate_observation: truth dimension " +
                      std::to_string(truth.theta.size()) + " != config dimension " +
                      std::to_string(config.dim));
  }
  Observation obs;
  obs.config = config;
  obs.seed = seed;
  obs.x.resize(config.dim);
  GaussianStream gauss(seed);
  const double noise = config.noise_sd();
  for (std::size_t i = 1; i <= config.dim; ++i) {
    obs.x[i - 1] = config.kappa(i) * truth.theta[i - 1] + noise * gauss.next();
  }
  return obs;
}

}  // namespace seqcred
