// residual_id/gmm.hpp

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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "residual_id/features.hpp"

namespace residual_id::gmm {

using features::FeatureMatrix;

/// Diagonal-covariance mixture lambda = {p_i, mu_i, sigma^2_i}.
struct GmmParams {
  int num_components = 0;
  int dim = 0;
  std::vector<double> weights;    // M
  std::vector<double> means;      // M x D, row-major
  std::vector<double> variances;  // M x D, row-major

  GmmParams() = default;
  GmmParams(int m, int d)
      : num_components(m),
        dim(d),
        weights(static_cast<std::size_t>(m), 1.0 / m),
        means(static_cast<std::size_t>(m) * d, 0.0),
        variances(static_cast<std::size_t>(m) * d, 1.0) {}

  std::span<const double> mean(int i) const {
    return {means.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
  }
  std::span<double> mean(int i) {
    return {means.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
  }
  std::span<const double> variance(int i) const {
    return {variances.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
  }
  std::span<double> variance(int i) {
    return {variances.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
  }

  /// Returns an empty string when the parameters are well formed, otherwise a
  /// description of the first violated invariant.
  std::string check(double weight_tolerance = 1e-10) const;
};

struct EmConfig {
  int max_iters = 100;
  double rel_tol = 1e-5;
  double variance_floor_factor = 1e-4;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Smallest admissible variance per dimension.
inline constexpr double kAbsoluteVarianceFloor = 1e-10;

/// factor * per-dimension population variance of X, never below
/// kAbsoluteVarianceFloor.
std::vector<double> variance_floor(const FeatureMatrix &x, double factor);

/// log sum_i p_i b_i(x) with a max-shifted log-sum-exp.
double gmm_logpdf(const GmmParams &gmm, std::span<const double> x);

/// sum_t log p(x_t | lambda).
double gmm_score(const GmmParams &gmm, const FeatureMatrix &x);

struct KMeansResult {
  std::vector<double> centers;  // k x D
  std::vector<int> assignment;  // per row
  std::vector<std::size_t> sizes;
};

/// Seeded Lloyd clustering: k distinct rows sampled without replacement as
/// initial centers, `iterations` assign/update rounds (ties go to the lowest
/// index; empty clusters take the point farthest from its own center). Every
/// returned cluster is nonempty.
KMeansResult kmeans(const FeatureMatrix &x, int k, std::uint64_t seed, int iterations = 10);

/// Mixture from k-means: weights are cluster fractions, variances the floored
/// per-cluster diagonal variances.
GmmParams kmeans_init(const FeatureMatrix &x, int m, std::uint64_t seed,
                      std::span<const double> floor);
GmmParams kmeans_init(const FeatureMatrix &x, int m, std::uint64_t seed,
                      double variance_floor_factor = 1e-4);

struct EmResult {
  GmmParams model;
  /// trace[k] is the total log-likelihood after k M-steps.
  std::vector<double> trace;
  /// All rows identical and M > 1; the model is still returned.
  bool degenerate_data = false;
};

EmResult em_fit(const FeatureMatrix &x, int m, const EmConfig &cfg);

}  // namespace residual_id::gmm
