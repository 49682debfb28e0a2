// src/features.cpp

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

#include "residual_id/features.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>

#include "residual_id/error.hpp"
#include "residual_id/fft.hpp"
#include "residual_id/lp.hpp"

namespace residual_id::features {

namespace {

constexpr double kSelectionEpsilon = 1e-12;
// Frames at or below this energy carry no excitation at all.
constexpr double kSilentFrameEnergy = 1e-12;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void FeatureMatrix::append_row(std::span<const double> values, double time_ms) {
  if (rows_ == 0 && dim_ == 0) dim_ = values.size();
  if (values.size() != dim_)
    fail(ErrorCode::DimensionMismatch, "row has " + std::to_string(values.size()) +
                                           " values, matrix dimension is " + std::to_string(dim_));
  data_.insert(data_.end(), values.begin(), values.end());
  frame_times_ms_.push_back(time_ms);
  ++rows_;
}

FeatureMatrix FeatureMatrix::concatenate(std::span<const FeatureMatrix> parts) {
  FeatureMatrix out;
  for (const FeatureMatrix &p : parts) {
    if (p.empty()) continue;
    if (out.rows_ == 0) out.dim_ = p.dim_;
    if (p.dim_ != out.dim_) fail(ErrorCode::DimensionMismatch, "cannot stack differing dimensions");
    out.data_.insert(out.data_.end(), p.data_.begin(), p.data_.end());
    out.frame_times_ms_.insert(out.frame_times_ms_.end(), p.frame_times_ms_.begin(),
                               p.frame_times_ms_.end());
    out.rows_ += p.rows_;
  }
  return out;
}

std::string FeatureMatrix::to_csv() const {
  std::string out;
  out.reserve(rows_ * dim_ * 24);
  for (std::size_t t = 0; t < rows_; ++t) {
    for (std::size_t d = 0; d < dim_; ++d) {
      if (d) out += ',';
      out += format_double((*this)(t, d));
    }
    out += '\n';
  }
  return out;
}

double mel(double frequency_hz) {
  if (frequency_hz < 0.0) fail(ErrorCode::NegativeFrequency, "frequency must be >= 0");
  return 2595.0 * std::log10(1.0 + frequency_hz / 700.0);
}

double mel_to_hz(double mel_value) { return 700.0 * (std::pow(10.0, mel_value / 2595.0) - 1.0); }

MelFilterbank build_filterbank(int num_filters, int fft_size, int sample_rate_hz,
                               double f_low_hz, double f_high_hz) {
  if (num_filters < 2) fail(ErrorCode::InvalidBand, "need at least two filters");
  if (fft_size < 2 || !is_power_of_two(static_cast<std::size_t>(fft_size)))
    fail(ErrorCode::InvalidArgument, "fft_size must be a power of two");
  if (sample_rate_hz <= 0) fail(ErrorCode::InvalidArgument, "sample rate must be positive");
  const double nyquist = sample_rate_hz / 2.0;
  if (!(f_low_hz >= 0.0) || !(f_low_hz < f_high_hz) || f_high_hz > nyquist)
    fail(ErrorCode::InvalidBand, "band must satisfy 0 <= f_low < f_high <= sample_rate / 2");

  MelFilterbank bank;
  bank.num_filters_ = num_filters;
  bank.fft_size_ = fft_size;
  bank.sample_rate_hz_ = sample_rate_hz;
  const std::size_t bins = bank.num_bins();
  bank.weights_.assign(static_cast<std::size_t>(num_filters) * bins, 0.0);

  const double mel_low = mel(f_low_hz);
  const double mel_high = mel(f_high_hz);
  const double step = (mel_high - mel_low) / (num_filters + 1);
  std::vector<double> grid(num_filters + 2);
  for (int i = 0; i < num_filters + 2; ++i) grid[i] = mel_low + step * i;

  const double bin_hz = static_cast<double>(sample_rate_hz) / fft_size;
  for (int k = 0; k < num_filters; ++k) {
    const double left = grid[k], center = grid[k + 1], right = grid[k + 2];
    bank.center_hz_.push_back(mel_to_hz(center));
    double total = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
      const double m = mel(bin_hz * static_cast<double>(b));
      double w = 0.0;
      if (m > left && m <= center)
        w = (m - left) / (center - left);
      else if (m > center && m < right)
        w = (right - m) / (right - center);
      bank.weights_[static_cast<std::size_t>(k) * bins + b] = w;
      total += w;
    }
    if (!(total > 0.0))
      fail(ErrorCode::InvalidBand, "filter " + std::to_string(k) +
                                       " covers no FFT bin; use fewer filters or a larger FFT");
  }
  return bank;
}

std::vector<double> MelFilterbank::apply(std::span<const double> power) const {
  if (power.size() != num_bins())
    fail(ErrorCode::DimensionMismatch, "power spectrum length does not match the filterbank");
  std::vector<double> energies(num_filters_, 0.0);
  for (int k = 0; k < num_filters_; ++k) {
    const auto w = weights(k);
    double sum = 0.0;
    for (std::size_t b = 0; b < power.size(); ++b) sum += w[b] * power[b];
    energies[k] = sum;
  }
  return energies;
}

void FeatureConfig::validate() const {
  frame.validate();
  if (lp_order < 1) fail(ErrorCode::InvalidArgument, "lp_order must be >= 1");
  if (fft_size < 2 || !is_power_of_two(static_cast<std::size_t>(fft_size)))
    fail(ErrorCode::InvalidArgument, "fft_size must be a power of two");
  if (num_filters < 2) fail(ErrorCode::InvalidArgument, "num_filters must be >= 2");
  if (num_ceps < 1 || num_ceps > num_filters)
    fail(ErrorCode::InvalidArgument, "num_ceps must lie in [1, num_filters]");
  if (f_low_hz < 0.0 || f_high_hz < 0.0) fail(ErrorCode::InvalidBand, "band edges must be >= 0");
  if (!(voicing_threshold_db > 0.0)) fail(ErrorCode::InvalidArgument, "voicing threshold must be positive");
}

std::string FeatureConfig::canonical() const {
  std::string s;
  s += "frame_ms=" + format_double(frame.frame_len_ms);
  s += ";shift_ms=" + format_double(frame.shift_ms);
  s += ";window=" + std::string(audio::window_name(frame.window));
  s += ";lp_order=" + std::to_string(lp_order);
  s += ";fft_size=" + std::to_string(fft_size);
  s += ";num_filters=" + std::to_string(num_filters);
  s += ";num_ceps=" + std::to_string(num_ceps);
  s += ";f_low_hz=" + format_double(f_low_hz);
  s += ";f_high_hz=" + format_double(f_high_hz);
  s += ";voicing_threshold_db=" + format_double(voicing_threshold_db);
  return s;
}

std::uint64_t FeatureConfig::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

MfccComputer::MfccComputer(MelFilterbank bank, std::size_t frame_length, int num_ceps)
    : bank_(std::move(bank)), frame_length_(frame_length), num_ceps_(num_ceps) {
  if (num_ceps < 1 || num_ceps > bank_.num_filters())
    fail(ErrorCode::InvalidArgument, "num_ceps must lie in [1, num_filters]");
  if (frame_length > static_cast<std::size_t>(bank_.fft_size()))
    fail(ErrorCode::FrameLongerThanFft, "frame of " + std::to_string(frame_length) +
                                            " samples exceeds FFT size " +
                                            std::to_string(bank_.fft_size()));
  window_ = audio::hamming_window(frame_length);
  const int m = bank_.num_filters();
  dct_.resize(static_cast<std::size_t>(num_ceps) * m);
  for (int j = 1; j <= num_ceps; ++j)
    for (int i = 0; i < m; ++i)
      dct_[static_cast<std::size_t>(j - 1) * m + i] =
          std::cos(std::numbers::pi * j * (i + 0.5) / m);
}

std::vector<double> MfccComputer::log_energies(std::span<const double> frame) const {
  if (frame.size() != frame_length_) {
    if (frame.size() > static_cast<std::size_t>(bank_.fft_size()))
      fail(ErrorCode::FrameLongerThanFft, "frame exceeds FFT size");
    fail(ErrorCode::DimensionMismatch, "frame length differs from the configured length");
  }
  std::vector<double> windowed(frame.size());
  for (std::size_t n = 0; n < frame.size(); ++n) windowed[n] = frame[n] * window_[n];
  std::vector<double> e = bank_.apply(power_spectrum(windowed, bank_.fft_size()));
  for (double &v : e) v = std::log(std::max(v, kLogEnergyFloor));
  return e;
}

void MfccComputer::compute(std::span<const double> frame, std::span<double> out) const {
  if (out.size() != static_cast<std::size_t>(num_ceps_))
    fail(ErrorCode::DimensionMismatch, "output size differs from num_ceps");
  const std::vector<double> log_e = log_energies(frame);
  const int m = bank_.num_filters();
  for (int j = 0; j < num_ceps_; ++j) {
    double c = 0.0;
    for (int i = 0; i < m; ++i) c += log_e[i] * dct_[static_cast<std::size_t>(j) * m + i];
    out[j] = c;
  }
}

std::vector<double> MfccComputer::compute(std::span<const double> frame) const {
  std::vector<double> out(num_ceps_);
  compute(frame, out);
  return out;
}

std::vector<double> mfcc_frame(std::span<const double> frame, const MelFilterbank &bank,
                               int num_ceps) {
  if (num_ceps > bank.num_filters())
    fail(ErrorCode::InvalidArgument, "num_ceps exceeds the number of filters");
  return MfccComputer(bank, frame.size(), num_ceps).compute(frame);
}

std::vector<std::size_t> select_frames(std::span<const audio::Frame> frames, double threshold_db) {
  std::vector<double> level(frames.size());
  double loudest = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    double energy = 0.0;
    for (double s : frames[i].samples) energy += s * s;
    level[i] = 10.0 * std::log10(energy + kSelectionEpsilon);
    loudest = std::max(loudest, level[i]);
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < frames.size(); ++i)
    if (level[i] > loudest - threshold_db) keep.push_back(i);
  return keep;
}

FeatureMatrix extract_features(const audio::AudioClip &clip, const FeatureConfig &cfg) {
  cfg.validate();
  const int rate = clip.sample_rate_hz;
  const double f_high = cfg.f_high_hz > 0.0 ? cfg.f_high_hz : rate / 2.0;
  MfccComputer mfcc(build_filterbank(cfg.num_filters, cfg.fft_size, rate, cfg.f_low_hz, f_high),
                    cfg.frame.frame_length(rate), cfg.num_ceps);

  const lp::ResidualSignal residual = lp::residual_of_clip(clip, cfg.frame, cfg.lp_order);
  // The MFCC stage applies its own Hamming window, so residual frames are cut raw.
  audio::FrameSpec raw = cfg.frame;
  raw.window = audio::Window::rectangular;
  const std::vector<audio::Frame> frames = audio::frame_signal(residual.samples, rate, raw);

  std::vector<std::size_t> keep;
  for (std::size_t i : select_frames(frames, cfg.voicing_threshold_db)) {
    double energy = 0.0;
    for (double s : frames[i].samples) energy += s * s;
    if (energy > kSilentFrameEnergy) keep.push_back(i);
  }
  if (keep.empty()) fail(ErrorCode::AllFramesRejected, "clip is effectively silent");

  const std::size_t dim = static_cast<std::size_t>(cfg.num_ceps);
  FeatureMatrix out(keep.size(), dim);
  const auto n = static_cast<std::ptrdiff_t>(keep.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    const audio::Frame &f = frames[keep[r]];
    mfcc.compute(f.samples, out.row(static_cast<std::size_t>(r)));
    out.frame_times_ms()[r] = 1000.0 * static_cast<double>(f.start_index) / rate;
  }
  return out;
}

}  // namespace residual_id::features
