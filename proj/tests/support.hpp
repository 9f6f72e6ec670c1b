#pragma once

// Test-only helpers: random inputs and independent loop oracles. Nothing here
// calls into the library's kernels.

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "varwind/autodiff.hpp"

namespace vwtest {

using varwind::ad::Array;
using varwind::ad::Shape;
using varwind::ad::Var;

inline Array random_array(std::mt19937_64& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(varwind::ad::numel(shape));
  for (double& x : v) x = dist(rng);
  return Array(std::move(shape), std::move(v));
}

inline Array random_mask(std::mt19937_64& rng, Shape shape, double p_one = 0.5) {
  std::bernoulli_distribution dist(p_one);
  std::vector<double> v(varwind::ad::numel(shape));
  for (double& x : v) x = dist(rng) ? 1.0 : 0.0;
  return Array(std::move(shape), std::move(v));
}

// y[b,o,t] = bias[o] + sum_{i,k} w[o,i,k] * x[b,i,t+k-pad]
inline std::vector<double> naive_conv1d(const Array& x, const Array& w, const std::vector<double>& bias) {
  const std::size_t B = x.dim(0), Ci = x.dim(1), T = x.dim(2), Co = w.dim(0), K = w.dim(2);
  const long pad = static_cast<long>(K / 2);
  std::vector<double> y(B * Co * T, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < Co; ++o)
      for (std::size_t t = 0; t < T; ++t) {
        double acc = bias.empty() ? 0.0 : bias[o];
        for (std::size_t i = 0; i < Ci; ++i)
          for (std::size_t k = 0; k < K; ++k) {
            const long s = static_cast<long>(t) + static_cast<long>(k) - pad;
            if (s < 0 || s >= static_cast<long>(T)) continue;
            acc += w[(o * Ci + i) * K + k] * x[(b * Ci + i) * T + static_cast<std::size_t>(s)];
          }
        y[(b * Co + o) * T + t] = acc;
      }
  return y;
}

// y[b,o] = bias[o] + sum_i w[o,i] x[b,i]
inline std::vector<double> naive_linear(const Array& x, const Array& w, const std::vector<double>& bias) {
  const std::size_t B = x.dim(0), Ci = x.dim(1), Co = w.dim(0);
  std::vector<double> y(B * Co);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < Co; ++o) {
      double acc = bias.empty() ? 0.0 : bias[o];
      for (std::size_t i = 0; i < Ci; ++i) acc += w[o * Ci + i] * x[b * Ci + i];
      y[b * Co + o] = acc;
    }
  return y;
}

inline double max_abs_diff(const std::vector<double>& a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Central finite differences of f at x, with the analytic gradient compared on
// a subset of coordinates (all when `max_coords` >= x.size()).
inline double fd_relative_error(const std::function<double(const Array&)>& f, const Array& x,
                                const Array& analytic, double h, std::size_t max_coords,
                                std::mt19937_64& rng) {
  std::vector<std::size_t> coords(x.size());
  for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  if (max_coords < coords.size()) {
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coords);
  }
  std::vector<double> probe = x.to_vector();
  double worst = 0.0;
  for (std::size_t i : coords) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double fp = f(Array(x.shape(), probe));
    probe[i] = saved - h;
    const double fm = f(Array(x.shape(), probe));
    probe[i] = saved;
    const double fd = (fp - fm) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic[i] - fd) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

}  // namespace vwtest
