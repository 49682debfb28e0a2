// residual_id/hmm.hpp

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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "residual_id/gmm.hpp"

namespace residual_id::hmm {

using features::FeatureMatrix;
using gmm::GmmParams;

/// ergodic: every transition allowed. left_right: a_ij = 0 for j < i.
enum class Topology { ergodic, left_right };

const char *topology_name(Topology t);
Topology parse_topology(const std::string &name);
bool transition_allowed(Topology topology, int from, int to);

/// lambda = (A, B, pi) with Gaussian-mixture emissions B.
struct HmmParams {
  int num_states = 0;
  Topology topology = Topology::ergodic;
  std::vector<double> transitions;  // N x N, row-major, row-stochastic
  std::vector<double> initial;      // N
  std::vector<GmmParams> emissions;

  double a(int i, int j) const {
    return transitions[static_cast<std::size_t>(i) * num_states + j];
  }
  int dim() const { return emissions.empty() ? 0 : emissions.front().dim; }

  /// Empty when valid, otherwise the first violated invariant.
  std::string check(double tolerance = 1e-10) const;
};

/// Single-state HMM whose emission is `g`.
HmmParams wrap_gmm(const GmmParams &g);

/// Uniform transitions over allowed entries; pi uniform (ergodic) or
/// (1, 0, ..., 0) (left_right). State emissions come from k-means on the
/// pooled frames: N clusters, then an M_total/N component k-means mixture on
/// each cluster. State i seeds its mixture with seed + i.
HmmParams init_hmm(std::span<const FeatureMatrix> sequences, int num_states, int mixture_total,
                   Topology topology, std::uint64_t seed, double variance_floor_factor = 1e-4);

/// log P(O | lambda) by the scaled forward recursion.
double forward_loglik(const HmmParams &hmm, const FeatureMatrix &x);

/// Posteriors of one sequence.
struct ForwardBackward {
  double loglik = 0.0;
  std::vector<double> gamma;  // T x N state occupancies
  std::vector<double> xi;     // N x N transition counts summed over t
};

ForwardBackward forward_backward(const HmmParams &hmm, const FeatureMatrix &x);

struct BaumWelchResult {
  HmmParams model;
  /// trace[k] is the total log-likelihood after k reestimations.
  std::vector<double> trace;
  /// frozen_states[k] lists states whose emission was held fixed in
  /// reestimation k+1 because their occupancy fell below 1e-6 of the frames.
  std::vector<std::vector<int>> frozen_states;
};

/// Baum-Welch with statistics accumulated over all sequences (in sequence
/// order) before each M-step.
BaumWelchResult baum_welch_fit(std::span<const FeatureMatrix> sequences, int num_states,
                               int mixture_total, Topology topology, const gmm::EmConfig &cfg);

}  // namespace residual_id::hmm
