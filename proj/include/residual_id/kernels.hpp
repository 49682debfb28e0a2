// residual_id/kernels.hpp

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

// Hot loops of training and scoring. Each kernel has an OpenMP version, used
// by the library, and a plain serial version kept as the reference the tests
// and benches compare against.
//
// Parallel reductions run over fixed blocks of kBlockFrames rows and combine
// block partials in block order, so results are bit-identical for any thread
// count. The serial references sum frame by frame and agree only to rounding.

#include <cstddef>
#include <span>
#include <vector>

#include "residual_id/gmm.hpp"

namespace residual_id::kernels {

inline constexpr std::size_t kBlockFrames = 256;

/// Per-component constants for repeated density evaluation.
struct GmmCache {
  int num_components = 0;
  int dim = 0;
  std::vector<double> log_norm;      // log p_i - D/2 log 2pi - 1/2 sum log var
  std::vector<double> inv_variance;  // M x D
  std::vector<double> means;         // M x D

  explicit GmmCache(const gmm::GmmParams &g);

  /// log p_i + log b_i(x); -inf for components with zero weight.
  double component(int i, std::span<const double> x) const;
  /// log sum_i exp(component(i, x)); fills `scratch` (size M) with the terms.
  double mixture(std::span<const double> x, std::span<double> scratch) const;
};

/// Sufficient statistics of one E-step.
struct GmmStats {
  int num_components = 0;
  int dim = 0;
  double loglik = 0.0;              // sum_t w_t log p(x_t)
  double total_weight = 0.0;        // sum_t w_t
  std::vector<double> occupancy;    // M
  std::vector<double> first;        // M x D, sum gamma x
  std::vector<double> second;       // M x D, sum gamma x^2

  GmmStats(int m, int d);
  void add(const GmmStats &other);
};

/// out[t] = log p(x_t | gmm).
void frame_loglik(const gmm::GmmParams &g, const features::FeatureMatrix &x,
                  std::span<double> out);
void frame_loglik_serial(const gmm::GmmParams &g, const features::FeatureMatrix &x,
                         std::span<double> out);

/// sum_t log p(x_t | gmm).
double total_loglik(const gmm::GmmParams &g, const features::FeatureMatrix &x);
double total_loglik_serial(const gmm::GmmParams &g, const features::FeatureMatrix &x);

/// E-step statistics with optional per-frame weights (state occupancies in
/// Baum-Welch). Empty `frame_weights` means weight 1 for every frame.
GmmStats accumulate(const gmm::GmmParams &g, const features::FeatureMatrix &x,
                    std::span<const double> frame_weights = {});
GmmStats accumulate_serial(const gmm::GmmParams &g, const features::FeatureMatrix &x,
                           std::span<const double> frame_weights = {});

/// M-step from accumulated statistics. Components with no occupancy keep
/// their previous mean and variance and get weight 0.
gmm::GmmParams reestimate(const GmmStats &stats, std::span<const double> floor,
                          const gmm::GmmParams &previous);

}  // namespace residual_id::kernels
