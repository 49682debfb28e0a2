// residual_id/lp.hpp

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

#include <span>
#include <vector>

#include "residual_id/audio_io.hpp"

namespace residual_id::lp {

inline constexpr int kDefaultOrder = 12;

/// Predictor with inverse filter A(z) = 1 + sum_k a_k z^-k, so the prediction
/// is s^(n) = -sum_k a_k s(n-k).
struct LpModel {
  int order = 0;
  std::vector<double> coeffs;      // a_1 .. a_p
  std::vector<double> reflection;  // k_1 .. k_p from the recursion
  double error_energy = 0.0;       // E_p = r[0] * prod(1 - k_i^2)
};

struct ResidualSignal {
  std::vector<double> samples;
  int sample_rate_hz = 16000;
};

/// r[k] = sum_{n=k}^{L-1} x[n] x[n-k] for k = 0..max_lag.
std::vector<double> autocorrelate(std::span<const double> frame, int max_lag);

/// Autocorrelation-method normal equations solved by the Levinson-Durbin
/// recursion. Throws ZeroEnergy when r[0] <= 0 and NumericalBreakdown when a
/// reflection coefficient leaves the unit interval by more than 1e-9.
LpModel levinson_durbin(std::span<const double> r, int order);

/// e(n) = s(n) + sum_k a_k s(n-k). `memory` holds the p samples preceding
/// `samples` in chronological order (memory.back() is s(-1)).
std::vector<double> inverse_filter(std::span<const double> samples,
                                   const LpModel &lp,
                                   std::span<const double> memory);

/// All-pole synthesis 1/A(z): s(n) = u(n) - sum_k a_k s(n-k). Same memory
/// convention as inverse_filter.
std::vector<double> synthesize(std::span<const double> excitation,
                               std::span<const double> coeffs,
                               std::span<const double> memory);

/// Framewise residual aligned 1:1 with the clip. For each analysis frame i
/// (start i*H, length L) the predictor is estimated on the windowed frame and
/// applied to the unwindowed hop region [i*H, (i+1)*H) with the true preceding
/// samples as memory. Silent frames (r[0] <= 1e-12) give zero residual.
/// Output length is frame_count * H.
ResidualSignal residual_of_clip(const audio::AudioClip &clip,
                                const audio::FrameSpec &spec,
                                int order = kDefaultOrder);

}  // namespace residual_id::lp
