// src/lp.cpp

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

#include "residual_id/lp.hpp"

#include <cmath>
#include <string>

#include "residual_id/error.hpp"

namespace residual_id::lp {

namespace {
constexpr double kSilenceEnergy = 1e-12;
constexpr double kReflectionSlack = 1e-9;
}  // namespace

std::vector<double> autocorrelate(std::span<const double> frame, int max_lag) {
  if (max_lag < 0 || static_cast<std::size_t>(max_lag) >= frame.size())
    fail(ErrorCode::LagTooLarge, "max_lag " + std::to_string(max_lag) +
                                     " needs a frame longer than " + std::to_string(frame.size()));
  const std::size_t n = frame.size();
  std::vector<double> r(static_cast<std::size_t>(max_lag) + 1, 0.0);
  for (int k = 0; k <= max_lag; ++k) {
    double sum = 0.0;
    for (std::size_t i = static_cast<std::size_t>(k); i < n; ++i) sum += frame[i] * frame[i - k];
    r[k] = sum;
  }
  return r;
}

LpModel levinson_durbin(std::span<const double> r, int order) {
  if (order < 1) fail(ErrorCode::InvalidArgument, "LP order must be >= 1");
  if (r.size() < static_cast<std::size_t>(order) + 1)
    fail(ErrorCode::InvalidArgument, "autocorrelation too short for order " + std::to_string(order));
  if (!(r[0] > 0.0)) fail(ErrorCode::ZeroEnergy, "r[0] must be positive");

  LpModel lp;
  lp.order = order;
  lp.coeffs.assign(order, 0.0);
  lp.reflection.assign(order, 0.0);
  std::vector<double> prev(order, 0.0);
  double err = r[0];

  for (int i = 0; i < order; ++i) {
    // a_j here uses the A(z) = 1 + sum a_j z^-j convention.
    double acc = r[i + 1];
    for (int j = 0; j < i; ++j) acc += lp.coeffs[j] * r[i - j];
    const double k = err > 0.0 ? -acc / err : 0.0;
    if (std::abs(k) >= 1.0 + kReflectionSlack)
      fail(ErrorCode::NumericalBreakdown,
           "reflection coefficient " + std::to_string(k) + " at stage " + std::to_string(i + 1));
    lp.reflection[i] = k;
    prev = lp.coeffs;
    for (int j = 0; j < i; ++j) lp.coeffs[j] = prev[j] + k * prev[i - 1 - j];
    lp.coeffs[i] = k;
    err *= (1.0 - k * k);
    if (err < 0.0) err = 0.0;
  }
  lp.error_energy = err;
  return lp;
}

std::vector<double> inverse_filter(std::span<const double> samples,
                                   const LpModel &lp,
                                   std::span<const double> memory) {
  const int p = lp.order;
  if (memory.size() != static_cast<std::size_t>(p) || lp.coeffs.size() != memory.size())
    fail(ErrorCode::MemoryLengthMismatch, "memory holds " + std::to_string(memory.size()) +
                                              " samples, order is " + std::to_string(p));
  const std::size_t n = samples.size();
  std::vector<double> e(n);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = samples[t];
    for (int k = 1; k <= p; ++k) {
      const double past = t >= static_cast<std::size_t>(k)
                              ? samples[t - k]
                              : memory[memory.size() - (k - t)];
      acc += lp.coeffs[k - 1] * past;
    }
    e[t] = acc;
  }
  return e;
}

std::vector<double> synthesize(std::span<const double> excitation,
                               std::span<const double> coeffs,
                               std::span<const double> memory) {
  const std::size_t p = coeffs.size();
  if (memory.size() != p)
    fail(ErrorCode::MemoryLengthMismatch, "memory length must equal the order");
  const std::size_t n = excitation.size();
  std::vector<double> s(n);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = excitation[t];
    for (std::size_t k = 1; k <= p; ++k) {
      const double past = t >= k ? s[t - k] : memory[p - (k - t)];
      acc -= coeffs[k - 1] * past;
    }
    s[t] = acc;
  }
  return s;
}

ResidualSignal residual_of_clip(const audio::AudioClip &clip,
                                const audio::FrameSpec &spec, int order) {
  if (order < 1) fail(ErrorCode::InvalidArgument, "LP order must be >= 1");
  const int rate = clip.sample_rate_hz;
  const std::size_t len = spec.frame_length(rate);
  const std::size_t hop = spec.hop_length(rate);
  if (static_cast<std::size_t>(order) >= len)
    fail(ErrorCode::LagTooLarge, "LP order must be smaller than the frame length");
  const std::vector<audio::Frame> frames = audio::frame_signal(clip, spec);

  ResidualSignal out;
  out.sample_rate_hz = rate;
  out.samples.assign(frames.size() * hop, 0.0);
  std::vector<double> memory(order);
  const auto &s = clip.samples;

  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::vector<double> r = autocorrelate(frames[i].samples, order);
    if (r[0] <= kSilenceEnergy) continue;
    const LpModel lp = levinson_durbin(r, order);
    const std::size_t start = frames[i].start_index;
    for (int k = 0; k < order; ++k) {
      const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(start) - order + k;
      memory[k] = idx >= 0 ? s[static_cast<std::size_t>(idx)] : 0.0;
    }
    const std::vector<double> e = inverse_filter(
        std::span<const double>(s).subspan(start, hop), lp, memory);
    std::copy(e.begin(), e.end(), out.samples.begin() + static_cast<std::ptrdiff_t>(start));
  }
  return out;
}

}  // namespace residual_id::lp
