// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace seqcred {

/// splitmix64 finalizer. Bijective on uint64, used for seed mixing and
/// replicate seed derivation (documented so seeds are portable).
///
///   z += 0x9E3779B97F4A7C15
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// splitmix64 stream (Steele, Lea, Flood 2014). Used to expand one 64-bit
/// seed into generator state.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// xoshiro256++ (Blackman & Vigna 2019), seeded by four splitmix64 outputs.
/// All simulation randomness in this library flows through this generator,
/// so seeded runs are bit-reproducible across platforms.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed) noexcept {
    SplitMix64 sm(seed);
    for (auto& word : state_) word = sm.next();
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  std::uint64_t next() noexcept {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// 53-bit uniform on [0, 1).
  double uniform01() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// 53-bit uniform on (0, 1] (safe as a log argument).
  double uniform_open01() noexcept {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> state_;
};

/// Standard normal stream via Box-Muller on xoshiro256++ uniforms.
///
/// Exact draw algorithm (frozen; golden observation fixtures depend on it):
///   r1, r2 = two engine words
///   u1 = ((r1 >> 11) + 1) * 2^-53   in (0, 1]
///   u2 =  (r2 >> 11)      * 2^-53   in [0, 1)
///   radius = sqrt(-2 ln u1), angle = 2 pi u2
///   first draw = radius * cos(angle), second draw = radius * sin(angle)
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) noexcept : eng_(seed) {}

  double next() noexcept {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = eng_.uniform_open01();
    const double u2 = eng_.uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

 private:
  Xoshiro256pp eng_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

namespace detail {

// 128-layer ziggurat tables for f(x) = exp(-x^2/2) (Marsaglia & Tsang 2000).
// width[0] is the base layer's pseudo-width V/f(R); width[i] = x_i otherwise.
// accept_below[i] is the horizontal fast-accept bound of layer i.
struct ZigguratTables {
  static constexpr double kR = 3.442619855899;
  static constexpr double kV = 9.91256303526217e-3;
  std::array<double, 128> width{};
  std::array<double, 129> accept_below{};
  std::array<double, 129> height{};  // f at the layer boundaries, height[128] = 1

  ZigguratTables() {
    const auto f = [](double x) { return std::exp(-0.5 * x * x); };
    std::array<double, 129> x{};
    x[1] = kR;
    for (int i = 1; i < 128; ++i) {
      x[i + 1] = std::sqrt(-2.0 * std::log(kV / x[i] + f(x[i])));
    }
    x[128] = 0.0;  // recursion lands within ~1e-9 of zero by construction of kV
    width[0] = kV / f(kR);
    accept_below[0] = kR;
    height[0] = 0.0;
    for (int i = 1; i < 128; ++i) {
      width[i] = x[i];
      accept_below[i] = x[i + 1];
      height[i] = f(x[i]);
    }
    height[128] = 1.0;
  }
};

inline const ZigguratTables& ziggurat_tables() {
  static const ZigguratTables tables;
  return tables;
}

}  // namespace detail

/// Fast standard normal sampler (128-layer ziggurat over xoshiro256++).
/// Used for bulk posterior draws where throughput matters; observation noise
/// uses GaussianStream so its simpler algorithm stays the portability anchor.
class FastNormal {
 public:
  explicit FastNormal(std::uint64_t seed) noexcept
      : eng_(seed), tables_(&detail::ziggurat_tables()) {}

  double next() noexcept {
    for (;;) {
      const std::uint64_t r = eng_.next();
      const int layer = static_cast<int>(r & 127u);
      // signed 53-bit uniform in [-1, 1); bits disjoint from the layer index
      const double u = static_cast<double>(r >> 11) * 0x1.0p-52 - 1.0;
      const double x = u * tables_->width[layer];
      if (std::abs(x) < tables_->accept_below[layer]) return x;
      if (layer == 0) {
        // Base layer outside [-R, R]: Marsaglia tail algorithm.
        const double sign = x >= 0.0 ? 1.0 : -1.0;
        for (;;) {
          const double tx = -std::log(eng_.uniform_open01()) / detail::ZigguratTables::kR;
          const double ty = -std::log(eng_.uniform_open01());
          if (2.0 * ty >= tx * tx) return sign * (detail::ZigguratTables::kR + tx);
        }
      }
      const double f_low = tables_->height[layer];
      const double f_high = tables_->height[layer + 1];
      const double v = eng_.uniform01();
      if (f_low + v * (f_high - f_low) < std::exp(-0.5 * x * x)) return x;
    }
  }

  Xoshiro256pp& engine() noexcept { return eng_; }

 private:
  Xoshiro256pp eng_;
  const detail::ZigguratTables* tables_;
};

/// Tagged sub-seed so independent random streams never share state.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) noexcept {
  return mix64(master ^ mix64(tag));
}

/// Replicate seed for experiment cell (n, replicate). Injective in
/// (n, replicate) for replicate < 2^20 and n < 2^44: the pair is packed into
/// one word and passed through bijective mixing, so distinct cells can never
/// collide under a fixed master seed.
inline std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t n,
                                    std::uint32_t replicate) {
  constexpr std::uint64_t kMaxReplicates = 1u << 20;
  if (replicate >= kMaxReplicates) throw std::invalid_argument("replicate index too large");
  if (n >= (1ULL << 44)) throw std::invalid_argument("n too large for seed packing");
  return mix64(master ^ mix64(n * kMaxReplicates + replicate));
}

}  // namespace seqcred
