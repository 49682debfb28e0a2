// src/gmm.cpp

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

#include "residual_id/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "residual_id/error.hpp"
#include "residual_id/kernels.hpp"
#include "residual_id/rng.hpp"

namespace residual_id::gmm {

namespace {

double squared_distance(std::span<const double> a, const double *b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

// Nearest center for every row, ties to the lowest center index. Returns the
// squared distance of each row to its center.
std::vector<double> assign_nearest(const FeatureMatrix &x, const std::vector<double> &centers,
                                   int k, std::vector<int> &assignment) {
  const std::size_t d = x.dim();
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
  std::vector<double> dist(x.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const auto row = x.row(static_cast<std::size_t>(t));
    int best = 0;
    double best_d = squared_distance(row, centers.data());
    for (int c = 1; c < k; ++c) {
      const double dc = squared_distance(row, centers.data() + static_cast<std::size_t>(c) * d);
      if (dc < best_d) {
        best_d = dc;
        best = c;
      }
    }
    assignment[t] = best;
    dist[t] = best_d;
  }
  return dist;
}

// Moves the point farthest from its own center into each empty cluster.
void fill_empty_clusters(const FeatureMatrix &x, std::vector<double> &centers, int k,
                         std::vector<int> &assignment, std::vector<double> &dist,
                         std::vector<std::size_t> &sizes) {
  const std::size_t d = x.dim();
  sizes.assign(static_cast<std::size_t>(k), 0);
  for (int a : assignment) ++sizes[a];
  for (int c = 0; c < k; ++c) {
    if (sizes[c] != 0) continue;
    std::size_t pick = x.rows();
    double pick_d = -1.0;
    for (std::size_t t = 0; t < x.rows(); ++t) {
      if (sizes[assignment[t]] < 2) continue;
      if (dist[t] > pick_d) {
        pick_d = dist[t];
        pick = t;
      }
    }
    if (pick == x.rows()) fail(ErrorCode::TooFewFrames, "cannot populate every cluster");
    --sizes[assignment[pick]];
    assignment[pick] = c;
    ++sizes[c];
    dist[pick] = 0.0;
    const auto row = x.row(pick);
    std::copy(row.begin(), row.end(), centers.begin() + static_cast<std::ptrdiff_t>(c * d));
  }
}

void update_centers(const FeatureMatrix &x, int k, const std::vector<int> &assignment,
                    const std::vector<std::size_t> &sizes, std::vector<double> &centers) {
  const std::size_t d = x.dim();
  std::fill(centers.begin(), centers.end(), 0.0);
  for (std::size_t t = 0; t < x.rows(); ++t) {
    const auto row = x.row(t);
    double *c = centers.data() + static_cast<std::size_t>(assignment[t]) * d;
    for (std::size_t j = 0; j < d; ++j) c[j] += row[j];
  }
  for (int c = 0; c < k; ++c)
    for (std::size_t j = 0; j < d; ++j)
      centers[static_cast<std::size_t>(c) * d + j] /= static_cast<double>(sizes[c]);
}

bool all_rows_identical(const FeatureMatrix &x) {
  for (std::size_t t = 1; t < x.rows(); ++t) {
    const auto a = x.row(0), b = x.row(t);
    if (!std::equal(a.begin(), a.end(), b.begin())) return false;
  }
  return true;
}

}  // namespace

std::string GmmParams::check(double weight_tolerance) const {
  if (num_components < 1) return "num_components must be >= 1";
  if (dim < 1) return "dimension must be >= 1";
  const auto m = static_cast<std::size_t>(num_components);
  const auto md = m * static_cast<std::size_t>(dim);
  if (weights.size() != m || means.size() != md || variances.size() != md)
    return "parameter arrays do not match M x D";
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) return "mixture weight negative or non-finite";
    sum += w;
  }
  if (std::abs(sum - 1.0) > weight_tolerance)
    return "mixture weights sum to " + std::to_string(sum) + ", expected 1";
  for (double mu : means)
    if (!std::isfinite(mu)) return "non-finite mean";
  for (double v : variances)
    if (!(v > 0.0) || !std::isfinite(v)) return "variance not positive and finite";
  return {};
}

void EmConfig::validate() const {
  if (max_iters < 1) fail(ErrorCode::InvalidArgument, "max_iters must be >= 1");
  if (!(rel_tol > 0.0)) fail(ErrorCode::InvalidArgument, "rel_tol must be > 0");
  if (!(variance_floor_factor >= 0.0))
    fail(ErrorCode::InvalidArgument, "variance_floor_factor must be >= 0");
}

std::vector<double> variance_floor(const FeatureMatrix &x, double factor) {
  const std::size_t d = x.dim();
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  if (x.empty()) return std::vector<double>(d, kAbsoluteVarianceFloor);
  for (std::size_t t = 0; t < x.rows(); ++t)
    for (std::size_t j = 0; j < d; ++j) mean[j] += x(t, j);
  for (double &m : mean) m /= static_cast<double>(x.rows());
  for (std::size_t t = 0; t < x.rows(); ++t)
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = x(t, j) - mean[j];
      var[j] += diff * diff;
    }
  for (double &v : var)
    v = std::max(factor * v / static_cast<double>(x.rows()), kAbsoluteVarianceFloor);
  return var;
}

double gmm_logpdf(const GmmParams &gmm, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(gmm.dim))
    fail(ErrorCode::DimensionMismatch, "observation has dimension " + std::to_string(x.size()) +
                                           ", model expects " + std::to_string(gmm.dim));
  const kernels::GmmCache cache(gmm);
  std::vector<double> scratch(static_cast<std::size_t>(gmm.num_components));
  return cache.mixture(x, scratch);
}

double gmm_score(const GmmParams &gmm, const FeatureMatrix &x) {
  if (x.empty()) fail(ErrorCode::EmptyFeatures, "no frames to score");
  return kernels::total_loglik(gmm, x);
}

KMeansResult kmeans(const FeatureMatrix &x, int k, std::uint64_t seed, int iterations) {
  if (k < 1) fail(ErrorCode::InvalidArgument, "cluster count must be >= 1");
  if (x.rows() < static_cast<std::size_t>(k))
    fail(ErrorCode::TooFewFrames, std::to_string(x.rows()) + " frames cannot seed " +
                                      std::to_string(k) + " clusters");
  const std::size_t d = x.dim();
  KMeansResult res;
  res.centers.resize(static_cast<std::size_t>(k) * d);

  // Partial Fisher-Yates: k distinct row indices.
  Rng rng(seed);
  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int c = 0; c < k; ++c) {
    const std::size_t j = c + rng.index(x.rows() - c);
    std::swap(order[c], order[j]);
    const auto row = x.row(order[c]);
    std::copy(row.begin(), row.end(), res.centers.begin() + static_cast<std::ptrdiff_t>(c * d));
  }

  res.assignment.assign(x.rows(), 0);
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> dist = assign_nearest(x, res.centers, k, res.assignment);
    fill_empty_clusters(x, res.centers, k, res.assignment, dist, res.sizes);
    update_centers(x, k, res.assignment, res.sizes, res.centers);
  }
  std::vector<double> dist = assign_nearest(x, res.centers, k, res.assignment);
  fill_empty_clusters(x, res.centers, k, res.assignment, dist, res.sizes);
  update_centers(x, k, res.assignment, res.sizes, res.centers);
  return res;
}

GmmParams kmeans_init(const FeatureMatrix &x, int m, std::uint64_t seed,
                      std::span<const double> floor) {
  if (floor.size() != x.dim()) fail(ErrorCode::DimensionMismatch, "variance floor has wrong size");
  const KMeansResult km = kmeans(x, m, seed);
  const int d = static_cast<int>(x.dim());
  GmmParams g(m, d);
  g.means = km.centers;
  std::fill(g.variances.begin(), g.variances.end(), 0.0);
  for (std::size_t t = 0; t < x.rows(); ++t) {
    const int c = km.assignment[t];
    const auto row = x.row(t);
    const auto mu = g.mean(c);
    auto var = g.variance(c);
    for (int j = 0; j < d; ++j) {
      const double diff = row[j] - mu[j];
      var[j] += diff * diff;
    }
  }
  for (int c = 0; c < m; ++c) {
    const double n = static_cast<double>(km.sizes[c]);
    g.weights[c] = n / static_cast<double>(x.rows());
    auto var = g.variance(c);
    for (int j = 0; j < d; ++j) var[j] = std::max(var[j] / n, floor[j]);
  }
  return g;
}

GmmParams kmeans_init(const FeatureMatrix &x, int m, std::uint64_t seed,
                      double variance_floor_factor) {
  const std::vector<double> floor = variance_floor(x, variance_floor_factor);
  return kmeans_init(x, m, seed, floor);
}

EmResult em_fit(const FeatureMatrix &x, int m, const EmConfig &cfg) {
  cfg.validate();
  if (m < 1) fail(ErrorCode::InvalidArgument, "component count must be >= 1");
  if (x.rows() < static_cast<std::size_t>(m))
    fail(ErrorCode::TooFewFrames, std::to_string(x.rows()) + " frames for " +
                                      std::to_string(m) + " components");
  const std::vector<double> floor = variance_floor(x, cfg.variance_floor_factor);

  EmResult res;
  res.degenerate_data = m > 1 && all_rows_identical(x);
  res.model = kmeans_init(x, m, cfg.seed, floor);
  kernels::GmmStats stats = kernels::accumulate(res.model, x);
  res.trace.push_back(stats.loglik);

  for (int it = 1; it <= cfg.max_iters; ++it) {
    GmmParams next = kernels::reestimate(stats, floor, res.model);
    kernels::GmmStats next_stats = kernels::accumulate(next, x);
    res.model = std::move(next);
    stats = std::move(next_stats);
    res.trace.push_back(stats.loglik);
    const double prev = res.trace[it - 1];
    const double gain = (stats.loglik - prev) / std::max(std::abs(prev), 1e-300);
    if (gain < cfg.rel_tol) break;
  }
  return res;
}

}  // namespace residual_id::gmm
