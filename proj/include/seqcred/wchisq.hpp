// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "seqcred/errors.hpp"

namespace seqcred::wchisq {

/// Distribution of Q = sum_i w_i W_i with W_i iid chi-square(1), w_i >= 0.
///
/// Supports the Imhof characteristic-function inversion
///   P(Q <= x) = 1/2 - (1/pi) Int_0^inf sin(theta(u)) / (u rho(u)) du,
///   theta(u) = a(u) - x u / 2,    a(u) = 1/2 sum_i atan(w_i u),
///   ln rho(u) = 1/4 sum_i ln(1 + w_i^2 u^2).
///
/// a, ln rho and a' are evaluated in three bands of y = w_i u: an asymptotic
/// expansion for y >= 80, the exact form for 0.01 < y < 80, and a Taylor
/// expansion for y <= 0.01, with precomputed prefix/suffix power sums so one
/// evaluation costs O(middle band + log D) instead of O(D).
class Distribution {
 public:
  explicit Distribution(std::vector<double> weights) {
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw NumericError("weighted chi-square: weights must be finite and >= 0");
      }
    }
    std::erase(weights, 0.0);
    std::sort(weights.begin(), weights.end(), std::greater<>());
    w_ = std::move(weights);
    const std::size_t dim = w_.size();
    pre_log_.assign(dim + 1, 0.0);
    pre_inv1_.assign(dim + 1, 0.0);
    pre_inv2_.assign(dim + 1, 0.0);
    pre_inv3_.assign(dim + 1, 0.0);
    pre_inv4_.assign(dim + 1, 0.0);
    pre_inv5_.assign(dim + 1, 0.0);
    pre_inv6_.assign(dim + 1, 0.0);
    pre_inv7_.assign(dim + 1, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
      const double w = w_[i];
      const double inv = 1.0 / w;
      const double inv2 = inv * inv;
      pre_log_[i + 1] = pre_log_[i] + std::log(w);
      pre_inv1_[i + 1] = pre_inv1_[i] + inv;
      pre_inv2_[i + 1] = pre_inv2_[i] + inv2;
      pre_inv3_[i + 1] = pre_inv3_[i] + inv * inv2;
      pre_inv4_[i + 1] = pre_inv4_[i] + inv2 * inv2;
      pre_inv5_[i + 1] = pre_inv5_[i] + inv * inv2 * inv2;
      pre_inv6_[i + 1] = pre_inv6_[i] + inv2 * inv2 * inv2;
      pre_inv7_[i + 1] = pre_inv7_[i] + inv * inv2 * inv2 * inv2;
    }
    suf1_.assign(dim + 1, 0.0);
    suf2_.assign(dim + 1, 0.0);
    suf3_.assign(dim + 1, 0.0);
    suf4_.assign(dim + 1, 0.0);
    suf5_.assign(dim + 1, 0.0);
    suf6_.assign(dim + 1, 0.0);
    suf7_.assign(dim + 1, 0.0);
    for (std::size_t i = dim; i >= 1; --i) {
      const double w = w_[i - 1];
      const double w2 = w * w;
      suf1_[i - 1] = suf1_[i] + w;
      suf2_[i - 1] = suf2_[i] + w2;
      suf3_[i - 1] = suf3_[i] + w * w2;
      suf4_[i - 1] = suf4_[i] + w2 * w2;
      suf5_[i - 1] = suf5_[i] + w * w2 * w2;
      suf6_[i - 1] = suf6_[i] + w2 * w2 * w2;
      suf7_[i - 1] = suf7_[i] + w * w2 * w2 * w2;
    }
  }

  bool degenerate() const { return w_.empty(); }
  std::size_t dim() const { return w_.size(); }
  double max_weight() const { return w_.empty() ? 0.0 : w_.front(); }
  double mean() const { return suf1_[0]; }
  double variance() const { return 2.0 * suf2_[0]; }

  struct Phase {
    double half_atan = 0.0;    // a(u)
    double quarter_log = 0.0;  // ln rho(u)
  };

  Phase phase(double u) const {
    const auto [hi_cut, lo_cut] = cuts(u);
    const double inv_u = 1.0 / u;
    const double inv_u2 = inv_u * inv_u;

    // y >= 80: atan(y) = pi/2 - 1/y + 1/(3y^3) - 1/(5y^5) + 1/(7y^7) - ...
    //          ln(1+y^2) = 2 ln y + 1/y^2 - 1/(2y^4) + 1/(3y^6) - ...
    double atan_sum = static_cast<double>(hi_cut) * (std::numbers::pi / 2.0) -
                      inv_u * pre_inv1_[hi_cut] +
                      inv_u2 * inv_u * pre_inv3_[hi_cut] / 3.0 -
                      inv_u2 * inv_u2 * inv_u * pre_inv5_[hi_cut] / 5.0 +
                      inv_u2 * inv_u2 * inv_u2 * inv_u * pre_inv7_[hi_cut] / 7.0;
    double log_sum = 2.0 * pre_log_[hi_cut] +
                     2.0 * static_cast<double>(hi_cut) * std::log(u) +
                     inv_u2 * pre_inv2_[hi_cut] -
                     inv_u2 * inv_u2 * pre_inv4_[hi_cut] / 2.0 +
                     inv_u2 * inv_u2 * inv_u2 * pre_inv6_[hi_cut] / 3.0;

    for (std::size_t i = hi_cut; i < lo_cut; ++i) {
      const double y = w_[i] * u;
      atan_sum += std::atan(y);
      log_sum += std::log1p(y * y);
    }

    // y <= 0.01: atan(y) = y - y^3/3 + y^5/5 - y^7/7 + ...
    //            ln(1+y^2) = y^2 - y^4/2 + y^6/3 - ...
    const double u2 = u * u;
    atan_sum += u * suf1_[lo_cut] - u * u2 * suf3_[lo_cut] / 3.0 +
                u * u2 * u2 * suf5_[lo_cut] / 5.0 - u * u2 * u2 * u2 * suf7_[lo_cut] / 7.0;
    log_sum += u2 * suf2_[lo_cut] - u2 * u2 * suf4_[lo_cut] / 2.0 +
               u2 * u2 * u2 * suf6_[lo_cut] / 3.0;

    return {0.5 * atan_sum, 0.25 * log_sum};
  }

  /// a'(u) = 1/2 sum_i w_i/(1 + w_i^2 u^2), same banding as phase().
  double phase_derivative(double u) const {
    const auto [hi_cut, lo_cut] = cuts(u);
    const double inv_u2 = 1.0 / (u * u);
    double sum = inv_u2 * pre_inv1_[hi_cut] - inv_u2 * inv_u2 * pre_inv3_[hi_cut];
    for (std::size_t i = hi_cut; i < lo_cut; ++i) {
      const double y = w_[i] * u;
      sum += w_[i] / (1.0 + y * y);
    }
    const double u2 = u * u;
    sum += suf1_[lo_cut] - u2 * suf3_[lo_cut] + u2 * u2 * suf5_[lo_cut];
    return 0.5 * sum;
  }

 private:
  static constexpr double kAsymptotic = 80.0;
  static constexpr double kTaylor = 0.01;

  std::pair<std::size_t, std::size_t> cuts(double u) const {
    // weights sorted descending: prefix [0, hi) has w u >= 80,
    // suffix [lo, dim) has w u <= 0.01
    const auto hi = std::lower_bound(w_.begin(), w_.end(), kAsymptotic / u, std::greater<>());
    const auto lo = std::lower_bound(hi, w_.end(), kTaylor / u, std::greater<>());
    return {static_cast<std::size_t>(hi - w_.begin()), static_cast<std::size_t>(lo - w_.begin())};
  }

  std::vector<double> w_;
  std::vector<double> pre_log_, pre_inv1_, pre_inv2_, pre_inv3_, pre_inv4_, pre_inv5_,
      pre_inv6_, pre_inv7_;
  std::vector<double> suf1_, suf2_, suf3_, suf4_, suf5_, suf6_, suf7_;
};

struct CdfOutcome {
  double value = 0.0;
  bool converged = false;
};

namespace detail {

/// Shared quadrature nodes for one quantile inversion: cached (a(u), envelope)
/// pairs on a dyadic ladder of uniform grids, so every bisection CDF
/// evaluation after the first reuses the expensive phase evaluations.
class InversionGrid {
 public:
  InversionGrid(const Distribution& dist, double du0) : dist_(&dist), du0_(du0) {}

  double spacing(int level) const { return du0_ / static_cast<double>(1u << level); }

  // level 0 node k: u = k du0 (k >= 1); level L>0 node m: u = (2m+1) du0/2^L
  std::span<const std::array<double, 2>> level0(std::size_t count) {
    while (nodes0_.size() < count) {
      const double u = du0_ * static_cast<double>(nodes0_.size() + 1);
      nodes0_.push_back(eval(u));
    }
    return {nodes0_.data(), count};
  }

  std::span<const std::array<double, 2>> midpoints(int level, std::size_t count) {
    auto& nodes = mid_nodes_[level];
    const double du = spacing(level);
    while (nodes.size() < count) {
      const double u = du * static_cast<double>(2 * nodes.size() + 1);
      nodes.push_back(eval(u));
    }
    return {nodes.data(), count};
  }

  std::size_t total_nodes() const {
    std::size_t total = nodes0_.size();
    for (const auto& nodes : mid_nodes_) total += nodes.size();
    return total;
  }

  static constexpr int kMaxLevels = 8;

 private:
  std::array<double, 2> eval(double u) const {
    const auto ph = dist_->phase(u);
    return {ph.half_atan, std::exp(-ph.quarter_log) / u};
  }

  const Distribution* dist_;
  double du0_;
  std::vector<std::array<double, 2>> nodes0_;
  std::array<std::vector<std::array<double, 2>>, kMaxLevels> mid_nodes_;
};

}  // namespace detail

/// CDF and quantile of Q by inversion of the characteristic function.
///
/// The integral splits at the first point U0 where the phase derivative has
/// dropped below x/4 (so theta is monotone decreasing at rate >= x/4 beyond
/// it). [0, U0] uses an adaptive trapezoid on a dyadic node ladder shared
/// across CDF evaluations; the remainder is either bounded by the alternating
/// half-period estimate 4 env(U0)/x and dropped, or summed lobe-by-lobe
/// between consecutive zero crossings of the integrand with repeated
/// averaging of the partial sums (Euler acceleration), which converges even
/// for the slowly decaying envelopes of low-dimensional weight vectors.
class ImhofInverter {
 public:
  explicit ImhofInverter(Distribution dist)
      : dist_(std::move(dist)), grid_(dist_, initial_spacing(dist_)) {}

  ImhofInverter(const ImhofInverter&) = delete;
  ImhofInverter& operator=(const ImhofInverter&) = delete;

  CdfOutcome cdf(double x) {
    if (dist_.degenerate()) return {x >= 0.0 ? 1.0 : 0.0, true};
    if (x <= 0.0) return {0.0, true};

    bool tail_needed = false;
    const std::size_t count0 = march_extent(x, tail_needed);
    if (count0 == 0) return {0.0, false};

    double integral = trapezoid_level0(x, count0);
    bool converged = false;
    double previous = integral;
    for (int level = 1; level < detail::InversionGrid::kMaxLevels; ++level) {
      const std::size_t mid_count = count0 << (level - 1);
      const auto mids = grid_.midpoints(level, mid_count);
      const double du = grid_.spacing(level);
      double mid_sum = 0.0;
      for (std::size_t m = 0; m < mid_count; ++m) {
        mid_sum += node_value(mids[m], x, du * static_cast<double>(2 * m + 1));
      }
      const double refined = 0.5 * previous + du * mid_sum;
      const bool close = std::abs(refined - previous) <=
                         std::max(kQuadAbsTol, kQuadRelTol * std::abs(refined));
      previous = refined;
      if (close) {
        converged = true;
        break;
      }
    }
    if (tail_needed) {
      bool tail_ok = false;
      previous += oscillating_tail(x, grid_.spacing(0) * static_cast<double>(count0), tail_ok);
      converged = converged && tail_ok;
    }
    const double value = 0.5 - previous / std::numbers::pi;
    return {std::clamp(value, 0.0, 1.0), converged};
  }

  /// prob-quantile of Q to relative tolerance rel_tol (bisection).
  CdfOutcome quantile(double prob, double rel_tol = 1e-8) {
    if (!(prob > 0.0 && prob < 1.0)) throw UsageError("quantile: prob must lie in (0,1)");
    if (dist_.degenerate()) return {0.0, true};
    double lo = 0.0;
    double hi = dist_.mean() + 10.0 * std::sqrt(dist_.variance());
    bool all_converged = true;
    for (int grow = 0;; ++grow) {
      const auto at_hi = cdf(hi);
      all_converged &= at_hi.converged;
      if (at_hi.value >= prob) break;
      lo = hi;
      hi *= 1.5;
      if (grow >= 200) throw NumericError("quantile: bracket growth failed");
    }
    for (int iter = 0; iter < 200; ++iter) {
      const double mid = 0.5 * (lo + hi);
      const auto at_mid = cdf(mid);
      all_converged &= at_mid.converged;
      if (at_mid.value >= prob) {
        hi = mid;
      } else {
        lo = mid;
      }
      if (hi - lo <= rel_tol * hi) break;
    }
    return {0.5 * (lo + hi), all_converged};
  }

 private:
  static constexpr double kQuadAbsTol = 1e-11;
  static constexpr double kQuadRelTol = 1e-10;
  static constexpr double kTailAbsTol = 1e-9;
  static constexpr double kTailConvergeTol = 1e-10;
  static constexpr double kEnvelopeFloor = 1e-12;
  static constexpr double kDirectEnvelopeCut = 1e-3;
  static constexpr std::size_t kMaxNodes = 4'000'000;
  static constexpr int kMaxLobes = 48;

  static double initial_spacing(const Distribution& dist) {
    const double x_hi = dist.mean() + 10.0 * std::sqrt(dist.variance());
    const double omega_max = 0.5 * std::max(dist.mean(), x_hi);
    const double du_osc = std::numbers::pi / (16.0 * omega_max);
    const double du_curv = 0.25 / dist.max_weight();
    return std::min(du_osc, du_curv);
  }

  static double node_value(const std::array<double, 2>& node, double x, double u) {
    return std::sin(node[0] - 0.5 * x * u) * node[1];
  }

  double integrand(double x, double u) const {
    if (u <= 0.0) return 0.5 * (dist_.mean() - x);
    const auto ph = dist_.phase(u);
    return std::sin(ph.half_atan - 0.5 * x * u) * std::exp(-ph.quarter_log) / u;
  }

  double theta(double x, double u) const {
    const auto ph = dist_.phase(u);
    return ph.half_atan - 0.5 * x * u;
  }

  double trapezoid_level0(double x, std::size_t count) {
    const double du0 = grid_.spacing(0);
    const auto nodes = grid_.level0(count);
    double sum = 0.5 * (0.5 * (dist_.mean() - x));  // g(0)/2
    for (std::size_t k = 0; k + 1 < count; ++k) {
      sum += node_value(nodes[k], x, du0 * static_cast<double>(k + 1));
    }
    sum += 0.5 * node_value(nodes[count - 1], x, du0 * static_cast<double>(count));
    return du0 * sum;
  }

  /// Level-0 node count for the direct segment. Marches until the phase is
  /// past stationary (a'(u) <= x/4, so the lobe machinery applies beyond) and
  /// the envelope has decayed enough that either the alternating remainder
  /// bound 4 env/x is below tolerance (no tail work needed) or remaining
  /// lobes are small. Returns 0 if the node budget runs out.
  std::size_t march_extent(double x, bool& tail_needed) {
    constexpr std::size_t kCheckStride = 16;
    const double du0 = grid_.spacing(0);
    std::size_t count = kCheckStride;
    for (;;) {
      const auto nodes = grid_.level0(count);
      const double u = du0 * static_cast<double>(count);
      const double env = nodes[count - 1][1];
      if (dist_.phase_derivative(u) <= 0.25 * x) {
        if (4.0 * env / x <= kTailAbsTol) {
          tail_needed = false;
          return count;
        }
        if (env <= kDirectEnvelopeCut) {
          tail_needed = true;
          return count;
        }
      }
      if (count + kCheckStride > kMaxNodes || grid_.total_nodes() >= kMaxNodes) return 0;
      count += kCheckStride;
    }
  }

  /// Adaptive Simpson on the integrand over [lo, hi] (absolute tolerance).
  double adaptive_simpson(double x, double lo, double hi, double f_lo, double f_hi,
                          double tol, int depth) const {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = integrand(x, mid);
    const double coarse = (hi - lo) / 6.0 * (f_lo + 4.0 * f_mid + f_hi);
    const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
    const double f_lm = integrand(x, lm), f_rm = integrand(x, rm);
    const double left = (mid - lo) / 6.0 * (f_lo + 4.0 * f_lm + f_mid);
    const double right = (hi - mid) / 6.0 * (f_mid + 4.0 * f_rm + f_hi);
    const double fine = left + right;
    if (depth <= 0 || std::abs(fine - coarse) <= 15.0 * tol ||
        hi - lo <= 1e-12 * (std::abs(lo) + 1.0)) {
      return fine + (fine - coarse) / 15.0;
    }
    return adaptive_simpson(x, lo, mid, f_lo, f_mid, 0.5 * tol, depth - 1) +
           adaptive_simpson(x, mid, hi, f_mid, f_hi, 0.5 * tol, depth - 1);
  }

  /// Simpson with tolerance scaled to the segment's own magnitude.
  double segment_integral(double x, double lo, double hi) const {
    const double f_lo = integrand(x, lo);
    const double f_hi = integrand(x, hi);
    const double f_mid = integrand(x, 0.5 * (lo + hi));
    const double scale =
        (hi - lo) * (std::abs(f_lo) + 4.0 * std::abs(f_mid) + std::abs(f_hi)) / 6.0;
    const double tol = std::max(1e-14, 1e-10 * scale);
    return adaptive_simpson(x, lo, hi, f_lo, f_hi, tol, 18);
  }

  /// Next u past `from` where theta(x, u) equals target. Valid past the
  /// stationary point, where theta decreases at rate at least x/4.
  double crossing_after(double x, double from, double theta_from, double target) const {
    double lo = from;
    double hi = from + (theta_from - target) / (0.25 * x);
    for (int guard = 0; guard < 200 && theta(x, hi) > target; ++guard) {
      lo = hi;
      hi += (theta(x, lo) - target) / (0.25 * x);
    }
    for (int iter = 0; iter < 60; ++iter) {
      const double mid = 0.5 * (lo + hi);
      if (theta(x, mid) > target) {
        lo = mid;
      } else {
        hi = mid;
      }
      if (hi - lo <= 1e-9 * std::max(1.0, hi)) break;
    }
    return 0.5 * (lo + hi);
  }

  static double averaged_limit(std::vector<double> row) {
    while (row.size() > 1) {
      for (std::size_t i = 0; i + 1 < row.size(); ++i) row[i] = 0.5 * (row[i] + row[i + 1]);
      row.pop_back();
    }
    return row[0];
  }

  /// Integral over [u0, infinity) summed lobe-by-lobe between consecutive
  /// zero crossings of sin(theta), accelerated by repeated averaging of the
  /// partial sums.
  double oscillating_tail(double x, double u0, bool& ok) const {
    constexpr double kPi = std::numbers::pi;
    const double theta0 = theta(x, u0);
    double target = kPi * std::floor(theta0 / kPi);
    if (target >= theta0) target -= kPi;

    // head piece [u0, first crossing]
    double z_prev = crossing_after(x, u0, theta0, target);
    const double head = segment_integral(x, u0, z_prev);

    std::vector<double> partial_sums;
    partial_sums.reserve(kMaxLobes);
    double running = 0.0;
    double prev_estimate = std::numeric_limits<double>::quiet_NaN();
    ok = false;
    for (int k = 0; k < kMaxLobes; ++k) {
      target -= kPi;
      const double z_next = crossing_after(x, z_prev, theta(x, z_prev), target);
      const double lobe = segment_integral(x, z_prev, z_next);
      running += lobe;
      partial_sums.push_back(running);
      z_prev = z_next;
      if (std::abs(lobe) <= 1e-12) {
        ok = true;
        return head + running;
      }
      if (partial_sums.size() >= 4) {
        const double estimate = averaged_limit(partial_sums);
        if (std::abs(estimate - prev_estimate) <= kTailConvergeTol) {
          ok = true;
          return head + estimate;
        }
        prev_estimate = estimate;
      }
    }
    return head + (std::isfinite(prev_estimate) ? prev_estimate : running);
  }

  Distribution dist_;
  detail::InversionGrid grid_;
};

}  // namespace seqcred::wchisq
