// residual_id/audio_io.hpp

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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace residual_id::audio {

/// Mono waveform with amplitudes nominally in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate_hz = 16000;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

enum class Window { rectangular, hamming };

const char *window_name(Window w);
Window parse_window(const std::string &name);

/// Analysis framing. Lengths in samples are round(ms * rate / 1000).
struct FrameSpec {
  double frame_len_ms = 20.0;
  double shift_ms = 10.0;
  Window window = Window::hamming;

  std::size_t frame_length(int sample_rate_hz) const;
  std::size_t hop_length(int sample_rate_hz) const;
  /// Throws InvalidArgument unless 0 < shift <= frame length.
  void validate() const;
};

struct Frame {
  std::vector<double> samples;
  std::size_t start_index = 0;
};

/// floor((len - frame_len) / hop) + 1, or 0 when len < frame_len.
std::size_t frame_count(std::size_t len, std::size_t frame_len, std::size_t hop);

/// w[n] = 0.54 - 0.46 cos(2 pi n / (L - 1)).
std::vector<double> hamming_window(std::size_t length);

/// 16-bit PCM mono RIFF/WAVE reader; samples are scaled by 1/32768.
AudioClip read_wav(const std::filesystem::path &path);
AudioClip decode_wav(std::span<const unsigned char> bytes);

/// Writes 16-bit PCM mono. Samples are clamped to [-1, 1], scaled by 32768,
/// rounded to nearest and saturated to the int16 range.
void write_wav(const AudioClip &clip, const std::filesystem::path &path);
std::vector<unsigned char> encode_wav(const AudioClip &clip);

/// Cuts frames at the configured hop; trailing partial frames are dropped.
std::vector<Frame> frame_signal(std::span<const double> samples,
                                int sample_rate_hz, const FrameSpec &spec);
inline std::vector<Frame> frame_signal(const AudioClip &clip,
                                       const FrameSpec &spec) {
  return frame_signal(clip.samples, clip.sample_rate_hz, spec);
}

}  // namespace residual_id::audio
