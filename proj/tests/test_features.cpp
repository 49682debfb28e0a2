// tests/test_features.cpp

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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "residual_id/error.hpp"
#include "residual_id/features.hpp"
#include "residual_id/fft.hpp"
#include "residual_id/lp.hpp"
#include "residual_id/synth.hpp"

using namespace residual_id;
using namespace residual_id::features;

namespace {

ErrorCode code_of(auto &&fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

std::vector<double> noise_frame(Rng &rng, std::size_t n) {
  std::vector<double> f(n);
  for (double &v : f) v = rng.normal();
  return f;
}

}  // namespace

TEST_CASE("mel curve") {
  CHECK(mel(0.0) == 0.0);
  CHECK(mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)).epsilon(1e-14));
  // mel(1000) is ~1000 but the curve already bends by 500 Hz (607 mel)
  CHECK(mel(1000.0) == doctest::Approx(1000.0).epsilon(1e-3));
  CHECK(std::abs(mel(500.0) - mel(1000.0) / 2) / mel(1000.0) == doctest::Approx(0.10745).epsilon(1e-3));
  for (double f : {0.0, 123.0, 1000.0, 7999.0}) CHECK(mel_to_hz(mel(f)) == doctest::Approx(f).epsilon(1e-12));
  CHECK(code_of([] { mel(-1.0); }) == ErrorCode::NegativeFrequency);
}

TEST_CASE("filterbank layout") {
  const MelFilterbank bank = build_filterbank(24, 512, 16000, 0.0, 8000.0);
  CHECK(bank.num_filters() == 24);
  CHECK(bank.num_bins() == 257);
  const auto &c = bank.center_hz();
  REQUIRE(c.size() == 24);
  for (std::size_t i = 1; i < c.size(); ++i) CHECK(c[i] > c[i - 1]);
  // a uniform Hz grid would put ~2.9 of 24 centers below 1 kHz
  const auto below = std::count_if(c.begin(), c.end(), [](double f) { return f < 1000.0; });
  CHECK(below > 24 * 1000 / 8000 + 1);
  for (int m = 0; m < 24; ++m) {
    const auto w = bank.weights(m);
    double s = 0.0;
    for (double v : w) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      s += v;
    }
    CHECK(s > 0.0);
  }
  const MelFilterbank high = build_filterbank(20, 512, 16000, 300.0, 8000.0);
  for (int m = 0; m < 20; ++m) CHECK(high.weights(m)[0] == 0.0);
}

TEST_CASE("filterbank errors") {
  CHECK(code_of([] { build_filterbank(24, 512, 16000, 4000.0, 3000.0); }) == ErrorCode::InvalidBand);
  CHECK(code_of([] { build_filterbank(24, 512, 16000, 0.0, 9000.0); }) == ErrorCode::InvalidBand);
  // too many filters for the resolution: some triangle covers no bin
  CHECK(code_of([] { build_filterbank(120, 256, 16000, 0.0, 8000.0); }) == ErrorCode::InvalidBand);
  CHECK(code_of([] { build_filterbank(24, 500, 16000, 0.0, 8000.0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("fft against a naive DFT") {
  Rng rng(4);
  const auto x = noise_frame(rng, 100);
  const auto p = power_spectrum(x, 128);
  REQUIRE(p.size() == 65);
  for (int k = 0; k <= 64; ++k) {
    std::complex<double> acc = 0.0;
    for (int t = 0; t < 100; ++t) acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * k * t / 128);
    CHECK(p[k] == doctest::Approx(std::norm(acc)).epsilon(1e-10));
  }
  CHECK(code_of([&] { power_spectrum(x, 64); }) == ErrorCode::FrameLongerThanFft);
}

TEST_CASE("all-zero frame gives zero cepstra") {
  const MelFilterbank bank = build_filterbank(24, 512, 16000, 0.0, 8000.0);
  const std::vector<double> zero(320, 0.0);
  const auto c = mfcc_frame(zero, bank, 13);
  REQUIRE(c.size() == 13);
  for (double v : c) CHECK(std::abs(v) < 1e-9);
  MfccComputer mc(bank, 320, 13);
  for (double v : mc.log_energies(zero)) CHECK(v == doctest::Approx(std::log(kLogEnergyFloor)));
}

TEST_CASE("amplitude scaling shifts log energies and leaves cepstra") {
  Rng rng(8);
  const MelFilterbank bank = build_filterbank(24, 512, 16000, 0.0, 8000.0);
  MfccComputer mc(bank, 320, 13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = noise_frame(rng, 320);
    auto g = f;
    for (double &v : g) v *= 2.0;
    const auto lf = mc.log_energies(f), lg = mc.log_energies(g);
    for (std::size_t m = 0; m < lf.size(); ++m) CHECK(lg[m] - lf[m] == doctest::Approx(2 * std::log(2.0)));
    const auto cf = mc.compute(f), cg = mc.compute(g);
    for (int j = 0; j < 13; ++j) CHECK(std::abs(cf[j] - cg[j]) < 1e-9);
  }
}

TEST_CASE("tone at a filter center peaks in that filter") {
  const MelFilterbank bank = build_filterbank(24, 512, 16000, 0.0, 8000.0);
  MfccComputer mc(bank, 320, 13);
  for (int m : {6, 10, 14, 18, 22}) {
    std::vector<double> tone(320);
    for (int n = 0; n < 320; ++n) tone[n] = std::sin(2.0 * std::numbers::pi * bank.center_hz()[m] * n / 16000.0);
    const auto e = bank.apply(power_spectrum(tone, 512));
    CHECK(std::max_element(e.begin(), e.end()) - e.begin() == m);
  }
}

TEST_CASE("frame selection") {
  using audio::Frame;
  std::vector<Frame> constant(10, Frame{std::vector<double>(100, 0.3), 0});
  CHECK(select_frames(constant).size() == 10);

  std::vector<Frame> mixed(10, Frame{std::vector<double>(100, 1e-3), 0});
  mixed[4].samples.assign(100, 1.0);
  CHECK(select_frames(mixed) == std::vector<std::size_t>{4});
  // 1e-3 amplitude is -60 dB; a 70 dB threshold keeps everything
  CHECK(select_frames(mixed, 70.0).size() == 10);

  // all frames equal the loudest; extraction drops them separately
  std::vector<Frame> silent(5, Frame{std::vector<double>(100, 0.0), 0});
  CHECK(select_frames(silent).size() == 5);
}

TEST_CASE("config fingerprint and validation") {
  FeatureConfig a, b;
  CHECK(a.fingerprint() == b.fingerprint());
  b.lp_order = 10;
  CHECK(a.fingerprint() != b.fingerprint());
  b = a;
  b.frame.window = audio::Window::rectangular;
  CHECK(a.fingerprint() != b.fingerprint());
  FeatureConfig bad;
  bad.num_ceps = 30;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidArgument);
  bad = FeatureConfig{};
  bad.lp_order = 0;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("extraction shape and determinism") {
  Rng rng(21);
  audio::AudioClip clip{noise_frame(rng, 48000), 16000};
  for (double &v : clip.samples) v *= 0.1;
  const FeatureConfig cfg;
  const FeatureMatrix x = extract_features(clip, cfg);
  CHECK(x.rows() == 298);
  CHECK(x.dim() == 13);
  const FeatureMatrix y = extract_features(clip, cfg);
  CHECK(x.data() == y.data());
  CHECK(x.frame_times_ms()[1] - x.frame_times_ms()[0] == doctest::Approx(10.0));

  const audio::AudioClip silent{std::vector<double>(48000, 0.0), 16000};
  CHECK(code_of([&] { extract_features(silent, cfg); }) == ErrorCode::AllFramesRejected);
}

TEST_CASE("voiced frames survive selection") {
  std::size_t voiced = 0, kept = 0;
  for (int spk = 0; spk < 4; ++spk) {
    const auto utt = synth::synthesize_annotated(synth::make_speaker_profile(spk, 77), 6.0, 500 + spk);
    const auto res = lp::residual_of_clip(utt.clip, audio::FrameSpec{});
    audio::FrameSpec rect;
    rect.window = audio::Window::rectangular;
    const auto frames = audio::frame_signal(res.samples, 16000, rect);
    const auto sel = select_frames(frames, 30.0);
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const std::size_t b = frames[i].start_index, e = b + 320;
      const bool inside = std::any_of(utt.segments.begin(), utt.segments.end(), [&](const auto &s) {
        return s.kind == synth::SegmentKind::voiced && s.begin <= b && e <= s.end;
      });
      if (!inside) continue;
      ++voiced;
      kept += std::binary_search(sel.begin(), sel.end(), i);
    }
  }
  REQUIRE(voiced > 0);
  CHECK(static_cast<double>(kept) / voiced >= 0.95);
}

TEST_CASE("feature matrix helpers") {
  FeatureMatrix a(0, 2);
  a.append_row(std::vector<double>{1.0, 0.1}, 0.0);
  a.append_row(std::vector<double>{2.0, 1.0 / 3.0}, 10.0);
  CHECK(a.rows() == 2);
  CHECK(code_of([&] { a.append_row(std::vector<double>{1.0}); }) == ErrorCode::DimensionMismatch);
  const std::string csv = a.to_csv();
  CHECK(csv.find("0.33333333333333331") != std::string::npos);
  const std::vector<FeatureMatrix> parts{a, a};
  const FeatureMatrix both = FeatureMatrix::concatenate(parts);
  CHECK(both.rows() == 4);
  CHECK(both(3, 0) == 2.0);
}
