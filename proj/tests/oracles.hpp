// tests/oracles.hpp

// Copyright 2026 The residual-id Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once
// Independent reference computations and random fixtures shared by the unit
// and acceptance tests. Nothing here calls the library's numeric code.

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <vector>

#include "residual_id/features.hpp"
#include "residual_id/gmm.hpp"
#include "residual_id/hmm.hpp"
#include "residual_id/rng.hpp"

namespace oracle {

using residual_id::Rng;
using residual_id::features::FeatureMatrix;
using residual_id::gmm::GmmParams;
using residual_id::hmm::HmmParams;
using residual_id::hmm::Topology;

inline std::vector<double> random_simplex(Rng &rng, int n) {
  std::vector<double> w(n);
  double s = 0.0;
  for (double &v : w) {
    v = 0.05 + rng.uniform();
    s += v;
  }
  for (double &v : w) v /= s;
  return w;
}

inline GmmParams random_gmm(Rng &rng, int m, int d, double spread = 3.0) {
  GmmParams g(m, d);
  g.weights = random_simplex(rng, m);
  for (double &v : g.means) v = rng.uniform(-spread, spread);
  for (double &v : g.variances) v = rng.uniform(0.2, 2.0);
  return g;
}

inline FeatureMatrix random_features(Rng &rng, std::size_t t, std::size_t d, double spread = 3.0) {
  FeatureMatrix x(t, d);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t k = 0; k < d; ++k) x(i, k) = spread * rng.normal();
  return x;
}

inline HmmParams random_hmm(Rng &rng, int n, int m_per_state, int d,
                            Topology topology = Topology::ergodic) {
  HmmParams h;
  h.num_states = n;
  h.topology = topology;
  h.transitions.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    const int first = topology == Topology::ergodic ? 0 : i;
    const std::vector<double> row = random_simplex(rng, n - first);
    for (int j = first; j < n; ++j) h.transitions[i * n + j] = row[j - first];
  }
  if (topology == Topology::ergodic) {
    h.initial = random_simplex(rng, n);
  } else {
    h.initial.assign(n, 0.0);
    h.initial[0] = 1.0;
  }
  for (int j = 0; j < n; ++j) h.emissions.push_back(random_gmm(rng, m_per_state, d));
  return h;
}

// log sum_i p_i N(x; mu_i, var_i) by direct summation in long double.
inline long double naive_logpdf(const GmmParams &g, std::span<const double> x) {
  long double total = 0.0L;
  const long double two_pi = 2.0L * std::numbers::pi_v<long double>;
  for (int i = 0; i < g.num_components; ++i) {
    long double quad = 0.0L, det = 1.0L;
    for (int k = 0; k < g.dim; ++k) {
      const long double diff = x[k] - g.means[i * g.dim + k];
      const long double var = g.variances[i * g.dim + k];
      quad += diff * diff / var;
      det *= two_pi * var;
    }
    total += g.weights[i] * std::exp(-0.5L * quad) / std::sqrt(det);
  }
  return std::log(total);
}

inline long double naive_score(const GmmParams &g, const FeatureMatrix &x) {
  long double s = 0.0L;
  for (std::size_t t = 0; t < x.rows(); ++t) s += naive_logpdf(g, x.row(t));
  return s;
}

// log of sum over all N^T state paths of pi * prod a * prod b.
inline long double brute_force_loglik(const HmmParams &h, const FeatureMatrix &x) {
  const int n = h.num_states;
  const std::size_t t_len = x.rows();
  std::vector<std::vector<long double>> b(t_len, std::vector<long double>(n));
  for (std::size_t t = 0; t < t_len; ++t)
    for (int j = 0; j < n; ++j) b[t][j] = std::exp(naive_logpdf(h.emissions[j], x.row(t)));
  std::size_t paths = 1;
  for (std::size_t t = 0; t < t_len; ++t) paths *= static_cast<std::size_t>(n);
  std::vector<int> q(t_len);
  long double total = 0.0L;
  for (std::size_t code = 0; code < paths; ++code) {
    std::size_t c = code;
    for (std::size_t t = 0; t < t_len; ++t) {
      q[t] = static_cast<int>(c % n);
      c /= n;
    }
    long double p = h.initial[q[0]] * b[0][q[0]];
    for (std::size_t t = 1; t < t_len; ++t) p *= h.transitions[q[t - 1] * n + q[t]] * b[t][q[t]];
    total += p;
  }
  return std::log(total);
}

// Normal equations R a = -r of the autocorrelation method, solved densely.
inline std::vector<double> toeplitz_solve(std::span<const double> r, int order) {
  Eigen::MatrixXd m(order, order);
  Eigen::VectorXd rhs(order);
  for (int i = 0; i < order; ++i) {
    for (int j = 0; j < order; ++j) m(i, j) = r[std::abs(i - j)];
    rhs(i) = -r[i + 1];
  }
  const Eigen::VectorXd a = m.colPivHouseholderQr().solve(rhs);
  return std::vector<double>(a.data(), a.data() + order);
}

inline std::vector<double> direct_autocorrelation(std::span<const double> x, int max_lag) {
  std::vector<double> r(max_lag + 1, 0.0);
  for (int k = 0; k <= max_lag; ++k)
    for (std::size_t n = k; n < x.size(); ++n) r[k] += x[n] * x[n - k];
  return r;
}

// Coefficients a_1..a_p of A(z) = prod (1 - p_i z^-1) for conjugate pole
// pairs drawn strictly inside radius r_max.
inline std::vector<double> random_stable_ar(Rng &rng, int order, double r_max = 0.95) {
  std::vector<std::complex<double>> poles;
  for (int i = 0; i < order / 2; ++i) {
    const double radius = rng.uniform(0.3, r_max);
    const double angle = rng.uniform(0.1, std::numbers::pi - 0.1);
    poles.push_back(std::polar(radius, angle));
    poles.push_back(std::polar(radius, -angle));
  }
  if (order % 2) poles.emplace_back(rng.uniform(-r_max, r_max), 0.0);
  std::vector<std::complex<double>> poly{1.0};
  for (const auto &p : poles) {
    std::vector<std::complex<double>> next(poly.size() + 1, 0.0);
    for (std::size_t k = 0; k < poly.size(); ++k) {
      next[k] += poly[k];
      next[k + 1] -= p * poly[k];
    }
    poly = next;
  }
  std::vector<double> a(order);
  for (int k = 0; k < order; ++k) a[k] = poly[k + 1].real();
  return a;
}

// exp(mean log P) / mean P of the Welch power spectrum (Hann, 512-point
// frames, half overlap). DC and Nyquist bins are excluded.
inline double spectral_flatness(std::span<const double> x) {
  const std::size_t n = std::min<std::size_t>(512, x.size());
  const std::size_t hop = n / 2;
  Eigen::FFT<double> fft;
  std::vector<double> frame(n), power(n / 2 + 1, 0.0);
  std::vector<std::complex<double>> spec;
  for (std::size_t start = 0; start + n <= x.size(); start += hop) {
    for (std::size_t t = 0; t < n; ++t)
      frame[t] = x[start + t] * (0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * t / (n - 1)));
    fft.fwd(spec, frame);
    for (std::size_t k = 0; k < power.size(); ++k) power[k] += std::norm(spec[k]);
  }
  double log_sum = 0.0, sum = 0.0;
  for (std::size_t k = 1; k + 1 < power.size(); ++k) {
    log_sum += std::log(power[k] + 1e-300);
    sum += power[k];
  }
  const double count = static_cast<double>(power.size() - 2);
  return std::exp(log_sum / count) / (sum / count);
}

// Pitch from the strongest autocorrelation peak of a signal
// within the 70-300 Hz lag range.
inline double autocorrelation_pitch_hz(std::span<const double> x, int fs) {
  const int lo = fs / 300, hi = fs / 70;
  double r0 = 0.0;
  for (double v : x) r0 += v * v;
  if (r0 <= 0.0) return 0.0;
  std::vector<double> r(hi + 2, 0.0);
  for (int k = lo - 1; k <= hi + 1; ++k)
    for (std::size_t n = k; n < x.size(); ++n) r[k] += x[n] * x[n - k];
  int best = -1;
  double best_v = -std::numeric_limits<double>::infinity();
  for (int k = lo; k <= hi; ++k) {
    const double v = r[k];
    if (r[k] >= r[k - 1] && r[k] >= r[k + 1] && v > best_v) {
      best_v = v;
      best = k;
    }
  }
  return best > 0 ? static_cast<double>(fs) / best : 0.0;
}

inline double relative_diff(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), std::numeric_limits<double>::min());
}

}  // namespace oracle
