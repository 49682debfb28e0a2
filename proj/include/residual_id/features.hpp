// residual_id/features.hpp

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
#include <string>
#include <vector>

#include "residual_id/audio_io.hpp"

namespace residual_id::features {

/// Row-major T x D observation sequence.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t dim)
      : rows_(rows), dim_(dim), data_(rows * dim, 0.0), frame_times_ms_(rows, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return rows_ == 0; }

  std::span<const double> row(std::size_t t) const { return {data_.data() + t * dim_, dim_}; }
  std::span<double> row(std::size_t t) { return {data_.data() + t * dim_, dim_}; }
  double operator()(std::size_t t, std::size_t d) const { return data_[t * dim_ + d]; }
  double &operator()(std::size_t t, std::size_t d) { return data_[t * dim_ + d]; }

  const std::vector<double> &data() const { return data_; }
  std::vector<double> &frame_times_ms() { return frame_times_ms_; }
  const std::vector<double> &frame_times_ms() const { return frame_times_ms_; }

  void append_row(std::span<const double> values, double time_ms = 0.0);

  /// Stacks the inputs; all must share a dimension.
  static FeatureMatrix concatenate(std::span<const FeatureMatrix> parts);

  /// CSV, one row per frame, 17 significant digits.
  std::string to_csv() const;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
  std::vector<double> frame_times_ms_;
};

/// mel(f) = 2595 log10(1 + f / 700).
double mel(double frequency_hz);
double mel_to_hz(double mel_value);

/// Triangular filters equally spaced on the mel axis. Row k rises from mel
/// point k-1 to 1 at point k and falls to 0 at point k+1 of the
/// (num_filters + 2)-point grid spanning [mel(f_low), mel(f_high)].
class MelFilterbank {
 public:
  int num_filters() const { return num_filters_; }
  int fft_size() const { return fft_size_; }
  int sample_rate_hz() const { return sample_rate_hz_; }
  std::size_t num_bins() const { return static_cast<std::size_t>(fft_size_ / 2 + 1); }

  std::span<const double> weights(int filter) const {
    return {weights_.data() + static_cast<std::size_t>(filter) * num_bins(), num_bins()};
  }
  const std::vector<double> &center_hz() const { return center_hz_; }

  /// E_m = sum_k w[m][k] * power[k].
  std::vector<double> apply(std::span<const double> power) const;

  friend MelFilterbank build_filterbank(int, int, int, double, double);

 private:
  int num_filters_ = 0;
  int fft_size_ = 0;
  int sample_rate_hz_ = 0;
  std::vector<double> weights_;
  std::vector<double> center_hz_;
};

MelFilterbank build_filterbank(int num_filters, int fft_size, int sample_rate_hz,
                               double f_low_hz, double f_high_hz);

struct FeatureConfig {
  audio::FrameSpec frame;  // LP analysis window and feature framing
  int lp_order = 12;
  int fft_size = 512;
  int num_filters = 24;
  int num_ceps = 13;
  double f_low_hz = 0.0;
  double f_high_hz = 0.0;  // 0 selects the Nyquist frequency
  double voicing_threshold_db = 30.0;

  void validate() const;
  /// Stable key=value rendering of every field.
  std::string canonical() const;
  /// FNV-1a 64 of canonical().
  std::uint64_t fingerprint() const;
};

inline constexpr double kLogEnergyFloor = 1e-10;

/// Reusable MFCC pipeline for one frame length. Immutable after construction.
class MfccComputer {
 public:
  MfccComputer(MelFilterbank bank, std::size_t frame_length, int num_ceps);

  /// Hamming window, zero-pad to the FFT size, power spectrum, mel energies,
  /// log(max(E, 1e-10)), DCT-II keeping c_1..c_num_ceps.
  std::vector<double> compute(std::span<const double> frame) const;
  void compute(std::span<const double> frame, std::span<double> out) const;

  /// Log mel energies only (exposed for tests).
  std::vector<double> log_energies(std::span<const double> frame) const;

  const MelFilterbank &bank() const { return bank_; }
  int num_ceps() const { return num_ceps_; }

 private:
  MelFilterbank bank_;
  std::size_t frame_length_;
  int num_ceps_;
  std::vector<double> window_;
  std::vector<double> dct_;  // num_ceps x num_filters
};

/// Single-frame convenience wrapper around MfccComputer.
std::vector<double> mfcc_frame(std::span<const double> frame, const MelFilterbank &bank,
                               int num_ceps);

/// Keeps frames whose energy is within `threshold_db` of the loudest frame.
std::vector<std::size_t> select_frames(std::span<const audio::Frame> frames,
                                       double threshold_db = 30.0);

/// Residual, framing, energy selection, per-frame MFCC. Throws
/// AllFramesRejected for effectively silent clips.
FeatureMatrix extract_features(const audio::AudioClip &clip, const FeatureConfig &cfg);

}  // namespace residual_id::features
