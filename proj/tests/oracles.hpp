#pragma once

// Reference implementations used only by tests. They deliberately avoid the
// library's own fast paths.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pufsec/puf.hpp"

namespace oracle {

/// Phi_i = prod_{j >= i} (1 - 2 c_j), recomputed per index.
inline std::vector<double> parity_direct(std::span<const std::uint8_t> c) {
  const std::size_t n = c.size();
  std::vector<double> phi(n + 1, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    double p = 1.0;
    for (std::size_t j = i; j < n; ++j) p *= 1.0 - 2.0 * c[j];
    phi[i] = p;
  }
  return phi;
}

/// Bits of `value` as a challenge, bit 0 first.
inline pufsec::Challenge challenge_from_index(std::uint64_t value, int n) {
  pufsec::Challenge c(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) c[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((value >> i) & 1U);
  return c;
}

/// Two-signal race through n switch stages.
///
/// Stage t has four segment delays: straight top/bottom and crossed
/// top->bottom / bottom->top. A 0 bit sends each signal straight, a 1 bit
/// swaps the lanes. The arbiter answers +1 when top - bottom >= 0.
struct ArbiterChainDelays {
  std::vector<double> straight_top, straight_bottom, cross_to_top, cross_to_bottom;

  int race(std::span<const std::uint8_t> c) const {
    double top = 0.0, bottom = 0.0;
    for (std::size_t t = 0; t < c.size(); ++t) {
      if (c[t] == 0) {
        top += straight_top[t];
        bottom += straight_bottom[t];
      } else {
        const double new_top = bottom + cross_to_top[t];
        const double new_bottom = top + cross_to_bottom[t];
        top = new_top;
        bottom = new_bottom;
      }
    }
    return top - bottom >= 0.0 ? 1 : -1;
  }
};

/// Builds physical segment delays reproducing additive weights w (n + 1
/// entries). With per-stage differences d0_t (straight) and d1_t (crossed),
/// alpha_t = (d0_t + d1_t) / 2 and beta_t = (d0_t - d1_t) / 2, the final
/// difference equals sum_t beta_t Phi_t + alpha_t Phi_{t+1}, so
/// w_t = beta_t + alpha_{t-1} and w_{n+1} = alpha_n. The free alphas are
/// drawn from `split` to make the decomposition non-trivial.
inline ArbiterChainDelays delays_from_weights(std::span<const double> w, const std::function<double()>& split,
                                              const std::function<double()>& base) {
  const std::size_t n = w.size() - 1;
  std::vector<double> alpha(n), beta(n);
  for (std::size_t t = 0; t + 1 < n; ++t) alpha[t] = split();
  alpha[n - 1] = w[n];
  for (std::size_t t = 0; t < n; ++t) beta[t] = w[t] - (t > 0 ? alpha[t - 1] : 0.0);
  ArbiterChainDelays d;
  for (std::size_t t = 0; t < n; ++t) {
    const double d0 = alpha[t] + beta[t];
    const double d1 = alpha[t] - beta[t];
    const double b0 = base(), b1 = base();
    d.straight_bottom.push_back(b0);
    d.straight_top.push_back(b0 + d0);
    d.cross_to_bottom.push_back(b1);
    d.cross_to_top.push_back(b1 + d1);
  }
  return d;
}

/// Central finite-difference gradient of f at x.
inline std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                            std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(1e-8, ||b||_inf), a scale-aware relative error.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, scale = 1e-8;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return diff / scale;
}

/// Index of the centroid nearest to x (squared Euclidean).
inline int nearest_centroid(const std::vector<std::vector<double>>& centroids, std::span<const double> x) {
  int best = 0;
  double best_d = INFINITY;
  for (std::size_t k = 0; k < centroids.size(); ++k) {
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d += (x[i] - centroids[k][i]) * (x[i] - centroids[k][i]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

}  // namespace oracle
