// src/kernels.cpp

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

#include "residual_id/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "residual_id/error.hpp"

namespace residual_id::kernels {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_dim(const gmm::GmmParams &g, const features::FeatureMatrix &x) {
  if (x.dim() != static_cast<std::size_t>(g.dim))
    fail(ErrorCode::DimensionMismatch, "features have dimension " + std::to_string(x.dim()) +
                                           ", model expects " + std::to_string(g.dim));
}

void check_weights(const features::FeatureMatrix &x, std::span<const double> w) {
  if (!w.empty() && w.size() != x.rows())
    fail(ErrorCode::DimensionMismatch, "frame weight count differs from frame count");
}

// Adds frames [begin, end) to `stats`.
void accumulate_range(const GmmCache &cache, const features::FeatureMatrix &x,
                      std::span<const double> w, std::size_t begin, std::size_t end,
                      GmmStats &stats, std::vector<double> &scratch) {
  const int m = cache.num_components;
  const int d = cache.dim;
  for (std::size_t t = begin; t < end; ++t) {
    const double wt = w.empty() ? 1.0 : w[t];
    if (wt == 0.0) continue;
    const auto row = x.row(t);
    const double lse = cache.mixture(row, scratch);
    stats.loglik += wt * lse;
    stats.total_weight += wt;
    for (int i = 0; i < m; ++i) {
      const double gamma = wt * std::exp(scratch[i] - lse);
      if (gamma == 0.0) continue;
      stats.occupancy[i] += gamma;
      double *f = stats.first.data() + static_cast<std::size_t>(i) * d;
      double *s = stats.second.data() + static_cast<std::size_t>(i) * d;
      for (int k = 0; k < d; ++k) {
        const double v = row[k];
        f[k] += gamma * v;
        s[k] += gamma * v * v;
      }
    }
  }
}

std::size_t block_count(std::size_t rows) { return (rows + kBlockFrames - 1) / kBlockFrames; }

}  // namespace

GmmCache::GmmCache(const gmm::GmmParams &g)
    : num_components(g.num_components),
      dim(g.dim),
      log_norm(static_cast<std::size_t>(g.num_components)),
      inv_variance(g.variances.size()),
      means(g.means) {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  for (int i = 0; i < num_components; ++i) {
    double log_det = 0.0;
    for (int k = 0; k < dim; ++k) {
      const double v = g.variances[static_cast<std::size_t>(i) * dim + k];
      log_det += std::log(v);
      inv_variance[static_cast<std::size_t>(i) * dim + k] = 1.0 / v;
    }
    const double w = g.weights[i];
    log_norm[i] = w > 0.0 ? std::log(w) - dim * half_log_2pi - 0.5 * log_det : kNegInf;
  }
}

double GmmCache::component(int i, std::span<const double> x) const {
  if (log_norm[i] == kNegInf) return kNegInf;
  const double *mu = means.data() + static_cast<std::size_t>(i) * dim;
  const double *iv = inv_variance.data() + static_cast<std::size_t>(i) * dim;
  double q = 0.0;
  for (int k = 0; k < dim; ++k) {
    const double diff = x[k] - mu[k];
    q += diff * diff * iv[k];
  }
  return log_norm[i] - 0.5 * q;
}

double GmmCache::mixture(std::span<const double> x, std::span<double> scratch) const {
  double best = kNegInf;
  for (int i = 0; i < num_components; ++i) {
    scratch[i] = component(i, x);
    best = std::max(best, scratch[i]);
  }
  if (best == kNegInf) return kNegInf;
  double sum = 0.0;
  for (int i = 0; i < num_components; ++i) sum += std::exp(scratch[i] - best);
  return best + std::log(sum);
}

GmmStats::GmmStats(int m, int d)
    : num_components(m),
      dim(d),
      occupancy(static_cast<std::size_t>(m), 0.0),
      first(static_cast<std::size_t>(m) * d, 0.0),
      second(static_cast<std::size_t>(m) * d, 0.0) {}

void GmmStats::add(const GmmStats &other) {
  loglik += other.loglik;
  total_weight += other.total_weight;
  for (std::size_t i = 0; i < occupancy.size(); ++i) occupancy[i] += other.occupancy[i];
  for (std::size_t i = 0; i < first.size(); ++i) first[i] += other.first[i];
  for (std::size_t i = 0; i < second.size(); ++i) second[i] += other.second[i];
}

void frame_loglik(const gmm::GmmParams &g, const features::FeatureMatrix &x,
                  std::span<double> out) {
  check_dim(g, x);
  if (out.size() != x.rows()) fail(ErrorCode::DimensionMismatch, "output size differs from frame count");
  const GmmCache cache(g);
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel
  {
    std::vector<double> scratch(static_cast<std::size_t>(g.num_components));
#pragma omp for schedule(static)
    for (std::ptrdiff_t t = 0; t < n; ++t)
      out[t] = cache.mixture(x.row(static_cast<std::size_t>(t)), scratch);
  }
}

void frame_loglik_serial(const gmm::GmmParams &g, const features::FeatureMatrix &x,
                         std::span<double> out) {
  check_dim(g, x);
  if (out.size() != x.rows()) fail(ErrorCode::DimensionMismatch, "output size differs from frame count");
  const GmmCache cache(g);
  std::vector<double> scratch(static_cast<std::size_t>(g.num_components));
  for (std::size_t t = 0; t < x.rows(); ++t) out[t] = cache.mixture(x.row(t), scratch);
}

double total_loglik(const gmm::GmmParams &g, const features::FeatureMatrix &x) {
  std::vector<double> per_frame(x.rows());
  frame_loglik(g, x, per_frame);
  const std::size_t blocks = block_count(x.rows());
  std::vector<double> partial(blocks, 0.0);
  const auto nb = static_cast<std::ptrdiff_t>(blocks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < nb; ++b) {
    const std::size_t begin = static_cast<std::size_t>(b) * kBlockFrames;
    const std::size_t end = std::min(begin + kBlockFrames, x.rows());
    double s = 0.0;
    for (std::size_t t = begin; t < end; ++t) s += per_frame[t];
    partial[b] = s;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

double total_loglik_serial(const gmm::GmmParams &g, const features::FeatureMatrix &x) {
  std::vector<double> per_frame(x.rows());
  frame_loglik_serial(g, x, per_frame);
  double total = 0.0;
  for (double v : per_frame) total += v;
  return total;
}

GmmStats accumulate(const gmm::GmmParams &g, const features::FeatureMatrix &x,
                    std::span<const double> frame_weights) {
  check_dim(g, x);
  check_weights(x, frame_weights);
  const GmmCache cache(g);
  const std::size_t blocks = block_count(x.rows());
  std::vector<GmmStats> partial(blocks, GmmStats(g.num_components, g.dim));
  const auto nb = static_cast<std::ptrdiff_t>(blocks);
#pragma omp parallel
  {
    std::vector<double> scratch(static_cast<std::size_t>(g.num_components));
#pragma omp for schedule(dynamic, 1)
    for (std::ptrdiff_t b = 0; b < nb; ++b) {
      const std::size_t begin = static_cast<std::size_t>(b) * kBlockFrames;
      const std::size_t end = std::min(begin + kBlockFrames, x.rows());
      accumulate_range(cache, x, frame_weights, begin, end, partial[b], scratch);
    }
  }
  GmmStats total(g.num_components, g.dim);
  for (const GmmStats &p : partial) total.add(p);
  return total;
}

GmmStats accumulate_serial(const gmm::GmmParams &g, const features::FeatureMatrix &x,
                           std::span<const double> frame_weights) {
  check_dim(g, x);
  check_weights(x, frame_weights);
  const GmmCache cache(g);
  GmmStats total(g.num_components, g.dim);
  std::vector<double> scratch(static_cast<std::size_t>(g.num_components));
  accumulate_range(cache, x, frame_weights, 0, x.rows(), total, scratch);
  return total;
}

gmm::GmmParams reestimate(const GmmStats &stats, std::span<const double> floor,
                          const gmm::GmmParams &previous) {
  const int m = stats.num_components;
  const int d = stats.dim;
  if (previous.num_components != m || previous.dim != d ||
      floor.size() != static_cast<std::size_t>(d))
    fail(ErrorCode::DimensionMismatch, "statistics, floor and model disagree in shape");
  double total = 0.0;
  for (double o : stats.occupancy) total += o;
  if (!(total > 0.0)) return previous;

  gmm::GmmParams next = previous;
  for (int i = 0; i < m; ++i) {
    const double occ = stats.occupancy[i];
    next.weights[i] = occ / total;
    if (!(occ > 0.0)) continue;
    for (int k = 0; k < d; ++k) {
      const std::size_t idx = static_cast<std::size_t>(i) * d + k;
      const double mu = stats.first[idx] / occ;
      const double var = stats.second[idx] / occ - mu * mu;
      next.means[idx] = mu;
      next.variances[idx] = std::max(var, floor[k]);
    }
  }
  double wsum = 0.0;
  for (double w : next.weights) wsum += w;
  for (double &w : next.weights) w /= wsum;
  return next;
}

}  // namespace residual_id::kernels
