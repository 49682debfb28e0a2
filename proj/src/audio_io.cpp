// src/audio_io.cpp

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

#include "residual_id/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

#include "residual_id/error.hpp"

namespace residual_id::audio {

namespace {

std::uint32_t read_u32(const unsigned char *p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char *p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<unsigned char> &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u16(std::vector<unsigned char> &out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

std::size_t ms_to_samples(double ms, int rate) {
  return static_cast<std::size_t>(std::llround(ms * rate / 1000.0));
}

}  // namespace

const char *window_name(Window w) {
  return w == Window::hamming ? "hamming" : "rectangular";
}

Window parse_window(const std::string &name) {
  if (name == "hamming") return Window::hamming;
  if (name == "rectangular") return Window::rectangular;
  fail(ErrorCode::InvalidArgument, "unknown window '" + name + "'");
}

std::size_t FrameSpec::frame_length(int sample_rate_hz) const {
  return ms_to_samples(frame_len_ms, sample_rate_hz);
}

std::size_t FrameSpec::hop_length(int sample_rate_hz) const {
  return ms_to_samples(shift_ms, sample_rate_hz);
}

void FrameSpec::validate() const {
  if (!(shift_ms > 0.0) || !(shift_ms <= frame_len_ms))
    fail(ErrorCode::InvalidArgument, "frame spec requires 0 < shift_ms <= frame_len_ms");
}

std::size_t frame_count(std::size_t len, std::size_t frame_len, std::size_t hop) {
  if (frame_len == 0 || hop == 0 || len < frame_len) return 0;
  return (len - frame_len) / hop + 1;
}

std::vector<double> hamming_window(std::size_t length) {
  std::vector<double> w(length, 1.0);
  if (length < 2) return w;
  const double denom = static_cast<double>(length - 1);
  for (std::size_t n = 0; n < length; ++n)
    w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / denom);
  return w;
}

AudioClip decode_wav(std::span<const unsigned char> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    fail(ErrorCode::MalformedHeader, "not a RIFF/WAVE file");

  bool have_fmt = false;
  int rate = 0;
  const unsigned char *data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char *chunk = bytes.data() + pos;
    const std::size_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || available < 16) fail(ErrorCode::MalformedHeader, "short fmt chunk");
      const unsigned char *f = bytes.data() + body;
      const std::uint16_t tag = read_u16(f);
      const std::uint16_t channels = read_u16(f + 2);
      const std::uint32_t sample_rate = read_u32(f + 4);
      const std::uint16_t bits = read_u16(f + 14);
      if (tag != 1) fail(ErrorCode::UnsupportedFormat, "format tag is not PCM (1)");
      if (channels != 1)
        fail(ErrorCode::UnsupportedFormat, "expected mono, got " + std::to_string(channels) + " channels");
      if (bits != 16)
        fail(ErrorCode::UnsupportedFormat, "expected 16 bits/sample, got " + std::to_string(bits));
      if (sample_rate == 0) fail(ErrorCode::MalformedHeader, "zero sample rate");
      rate = static_cast<int>(sample_rate);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      // Writers that stream sometimes leave the size unpatched; trust the file length.
      data_len = std::min(size, available);
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) fail(ErrorCode::MalformedHeader, "missing fmt chunk");
  if (data == nullptr) fail(ErrorCode::MalformedHeader, "missing data chunk");

  AudioClip clip;
  clip.sample_rate_hz = rate;
  const std::size_t n = data_len / 2;
  if (n == 0) fail(ErrorCode::EmptyAudio, "data chunk holds no samples");
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = static_cast<std::int16_t>(read_u16(data + 2 * i));
    clip.samples[i] = static_cast<double>(v) / 32768.0;
  }
  return clip;
}

AudioClip read_wav(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

std::vector<unsigned char> encode_wav(const AudioClip &clip) {
  if (clip.samples.empty()) fail(ErrorCode::EmptyAudio, "cannot write an empty clip");
  if (clip.sample_rate_hz <= 0) fail(ErrorCode::InvalidArgument, "sample rate must be positive");
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_bytes);
  for (double s : clip.samples) {
    const double clamped = std::clamp(s, -1.0, 1.0);
    const long q = std::clamp(std::lround(clamped * 32768.0), -32768L, 32767L);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  return out;
}

void write_wav(const AudioClip &clip, const std::filesystem::path &path) {
  const auto bytes = encode_wav(clip);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot create " + path.string());
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

std::vector<Frame> frame_signal(std::span<const double> samples,
                                int sample_rate_hz, const FrameSpec &spec) {
  spec.validate();
  if (sample_rate_hz <= 0) fail(ErrorCode::InvalidArgument, "sample rate must be positive");
  const std::size_t len = spec.frame_length(sample_rate_hz);
  const std::size_t hop = spec.hop_length(sample_rate_hz);
  if (len == 0 || hop == 0) fail(ErrorCode::InvalidArgument, "frame spec rounds to zero samples");
  const std::size_t count = frame_count(samples.size(), len, hop);
  if (count == 0)
    fail(ErrorCode::ClipTooShort, "clip has " + std::to_string(samples.size()) +
                                      " samples, frame needs " + std::to_string(len));
  const std::vector<double> window =
      spec.window == Window::hamming ? hamming_window(len) : std::vector<double>(len, 1.0);
  std::vector<Frame> frames(count);
  for (std::size_t i = 0; i < count; ++i) {
    Frame &f = frames[i];
    f.start_index = i * hop;
    f.samples.assign(samples.begin() + static_cast<std::ptrdiff_t>(f.start_index),
                     samples.begin() + static_cast<std::ptrdiff_t>(f.start_index + len));
    if (spec.window == Window::hamming)
      for (std::size_t n = 0; n < len; ++n) f.samples[n] *= window[n];
  }
  return frames;
}

}  // namespace residual_id::audio
