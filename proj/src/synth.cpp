// src/synth.cpp

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

#include "residual_id/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numbers>
#include <sstream>

#include "residual_id/error.hpp"
#include "residual_id/rng.hpp"

namespace residual_id::synth {

namespace {

constexpr std::uint64_t kPoolStream = 1;
constexpr std::uint64_t kProfileStream = 2;
constexpr std::uint64_t kUtteranceStream = 3;

constexpr int kPoolSize = 10;
constexpr int kSetsPerSpeaker = 4;
constexpr int kMaxResamples = 1000;

constexpr double kMinPitchGap = 5.0;
constexpr double kMinShapeGap = 0.05;

std::complex<double> resonance(double freq_hz, double bandwidth_hz) {
  const double r = std::exp(-std::numbers::pi * bandwidth_hz / kSampleRate);
  return std::polar(r, 2.0 * std::numbers::pi * freq_hz / kSampleRate);
}

bool separated(const SpeakerProfile &a, const SpeakerProfile &b) {
  const double shape_gap = std::max(std::abs(a.glottal.open_quotient - b.glottal.open_quotient),
                                    std::abs(a.glottal.asymmetry - b.glottal.asymmetry));
  return std::abs(a.pitch_hz - b.pitch_hz) >= kMinPitchGap && shape_gap >= kMinShapeGap;
}

SpeakerProfile draw_profile(Rng &rng, int index, const std::vector<PoleSet> &pool) {
  SpeakerProfile p;
  char id[16];
  std::snprintf(id, sizeof id, "spk%03d", index);
  p.speaker_id = id;
  p.pitch_hz = rng.uniform(80.0, 260.0);
  p.pitch_jitter = rng.uniform(0.003, 0.012);
  p.glottal.open_quotient = rng.uniform(0.35, 0.8);
  p.glottal.asymmetry = rng.uniform(0.55, 0.85);
  p.noise_floor = rng.uniform(0.005, 0.03);
  std::vector<int> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  for (int c = 0; c < kSetsPerSpeaker; ++c) {
    const auto j = c + static_cast<std::size_t>(rng.index(order.size() - c));
    std::swap(order[c], order[j]);
    p.tract_pole_sets.push_back(pool[order[c]]);
  }
  return p;
}

// Flow of the two-piece pulse at phase in [0, 1).
double glottal_flow(double phase, const GlottalShape &g) {
  const double rise = g.open_quotient * g.asymmetry;
  const double fall = g.open_quotient * (1.0 - g.asymmetry);
  if (phase < rise) {
    const double x = phase / rise;
    return x * x * (3.0 - 2.0 * x);
  }
  if (phase < rise + fall) {
    const double y = (phase - rise) / fall;
    return 1.0 - y * y;
  }
  return 0.0;
}

// Cascade of second-order resonators with unit DC gain per section.
class Tract {
 public:
  void configure(const PoleSet &set) {
    sections_.resize(set.poles.size());
    for (std::size_t i = 0; i < set.poles.size(); ++i) {
      const double r = std::abs(set.poles[i]);
      const double c = std::cos(std::arg(set.poles[i]));
      Section &s = sections_[i];
      s.a1 = -2.0 * r * c;
      s.a2 = r * r;
      s.gain = 1.0 + s.a1 + s.a2;
    }
  }

  double step(double x) {
    for (Section &s : sections_) {
      const double y = s.gain * x - s.a1 * s.y1 - s.a2 * s.y2;
      s.y2 = s.y1;
      s.y1 = y;
      x = y;
    }
    return x;
  }

 private:
  struct Section {
    double a1 = 0, a2 = 0, gain = 1, y1 = 0, y2 = 0;
  };
  std::vector<Section> sections_;
};

}  // namespace

std::vector<PoleSet> tract_pool(std::uint64_t master_seed) {
  Rng rng(derive_seed(master_seed, {kPoolStream}));
  std::vector<PoleSet> pool;
  for (int i = 0; i < kPoolSize; ++i) {
    const double f1 = rng.uniform(270.0, 850.0);
    const double f2 = std::max(f1 + 250.0, rng.uniform(850.0, 2400.0));
    const double f3 = std::max(f2 + 300.0, rng.uniform(2300.0, 3100.0));
    const double f4 = rng.uniform(3400.0, 4000.0);
    const double f5 = rng.uniform(4400.0, 5200.0);
    PoleSet s;
    for (double f : {f1, f2, f3, f4, f5}) s.poles.push_back(resonance(f, rng.uniform(60.0, 120.0) + 0.04 * f));
    pool.push_back(std::move(s));
  }
  return pool;
}

std::vector<SpeakerProfile> make_speaker_profiles(int count, std::uint64_t master_seed) {
  if (count < 0) fail(ErrorCode::InvalidArgument, "speaker count must be >= 0");
  const std::vector<PoleSet> pool = tract_pool(master_seed);
  std::vector<SpeakerProfile> out;
  for (int index = 0; index < count; ++index) {
    Rng rng(derive_seed(master_seed, {kProfileStream, static_cast<std::uint64_t>(index)}));
    bool ok = false;
    for (int attempt = 0; attempt < kMaxResamples && !ok; ++attempt) {
      SpeakerProfile p = draw_profile(rng, index, pool);
      ok = std::all_of(out.begin(), out.end(), [&](const SpeakerProfile &q) { return separated(p, q); });
      if (ok) out.push_back(std::move(p));
    }
    if (!ok)
      fail(ErrorCode::ProfileSpaceExhausted,
           "no separated profile for speaker " + std::to_string(index) + " after " +
               std::to_string(kMaxResamples) + " draws");
  }
  return out;
}

SpeakerProfile make_speaker_profile(int index, std::uint64_t master_seed) {
  if (index < 0) fail(ErrorCode::InvalidArgument, "speaker index must be >= 0");
  return make_speaker_profiles(index + 1, master_seed).back();
}

Utterance synthesize_annotated(const SpeakerProfile &profile, double duration_s,
                               std::uint64_t utterance_seed) {
  if (!(duration_s > 0.0)) fail(ErrorCode::InvalidArgument, "duration must be positive");
  if (profile.tract_pole_sets.empty()) fail(ErrorCode::InvalidArgument, "profile has no tract configurations");
  Rng rng(utterance_seed);
  const auto n = static_cast<std::size_t>(std::llround(duration_s * kSampleRate));
  Utterance utt;
  utt.clip.sample_rate_hz = kSampleRate;
  utt.clip.samples.assign(n, 0.0);

  // Segment schedule: voiced, unvoiced, voiced, silence, ... Mean lengths
  // (350, 140, 350, 93 ms) give roughly 75/15/10 percent.
  const SegmentKind cycle[4] = {SegmentKind::voiced, SegmentKind::unvoiced, SegmentKind::voiced,
                                SegmentKind::silence};
  std::size_t pos = 0;
  for (int c = 0; pos < n; c = (c + 1) % 4) {
    double ms = 0.0;
    switch (cycle[c]) {
      case SegmentKind::voiced: ms = rng.uniform(250.0, 450.0); break;
      case SegmentKind::unvoiced: ms = rng.uniform(100.0, 180.0); break;
      case SegmentKind::silence: ms = rng.uniform(60.0, 126.0); break;
    }
    const std::size_t len = static_cast<std::size_t>(ms * kSampleRate / 1000.0);
    const std::size_t end = std::min(n, pos + len);
    utt.segments.push_back(Segment{cycle[c], pos, end});
    pos = end;
  }

  const double base_period = kSampleRate / profile.pitch_hz;
  const GlottalShape &g = profile.glottal;
  const double fall = g.open_quotient * (1.0 - g.asymmetry);

  Tract tract;
  std::size_t set_index = static_cast<std::size_t>(rng.index(profile.tract_pole_sets.size()));
  tract.configure(profile.tract_pole_sets[set_index]);
  std::size_t next_switch = static_cast<std::size_t>(rng.uniform(0.150, 0.300) * kSampleRate);

  double phase = 0.0;
  double period = base_period;
  double prev_flow = 0.0;
  std::size_t seg = 0;
  double gain = 1.0;
  for (std::size_t t = 0; t < n; ++t) {
    while (t >= utt.segments[seg].end) ++seg;
    const Segment &s = utt.segments[seg];
    if (t == s.begin) gain = rng.uniform(0.6, 1.0);
    if (t == next_switch) {
      set_index = (set_index + 1) % profile.tract_pole_sets.size();
      tract.configure(profile.tract_pole_sets[set_index]);
      next_switch += static_cast<std::size_t>(rng.uniform(0.150, 0.300) * kSampleRate);
    }

    // The glottal oscillator runs continuously so voicing resumes mid-cycle.
    phase += 1.0 / period;
    if (phase >= 1.0) {
      phase -= 1.0;
      period = base_period * (1.0 + profile.pitch_jitter * rng.normal());
    }
    const double flow = glottal_flow(phase, g);
    // Flow derivative scaled so the closing slope is about -2.
    const double pulse = (flow - prev_flow) * fall * period;
    prev_flow = flow;

    double excitation = 0.0;
    switch (s.kind) {
      case SegmentKind::voiced: excitation = gain * (pulse + profile.noise_floor * rng.normal()); break;
      case SegmentKind::unvoiced: excitation = gain * 0.15 * rng.normal(); break;
      case SegmentKind::silence: excitation = 0.0; break;
    }
    utt.clip.samples[t] = tract.step(excitation);
  }

  double peak = 0.0;
  for (double v : utt.clip.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double &v : utt.clip.samples) v *= 0.9 / peak;
  return utt;
}

audio::AudioClip synthesize_utterance(const SpeakerProfile &profile, double duration_s,
                                      std::uint64_t utterance_seed) {
  return synthesize_annotated(profile, duration_s, utterance_seed).clip;
}

void CorpusSpec::validate() const {
  if (num_speakers < 1) fail(ErrorCode::InvalidArgument, "num_speakers must be >= 1");
  if (!(train_seconds > 0.0)) fail(ErrorCode::InvalidArgument, "train_seconds must be positive");
  if (test_clips_per_speaker < 0) fail(ErrorCode::InvalidArgument, "test_clips_per_speaker must be >= 0");
  if (test_clips_per_speaker > 0 && !(test_clip_seconds > 0.0))
    fail(ErrorCode::InvalidArgument, "test_clip_seconds must be positive");
}

std::uint64_t utterance_seed(std::uint64_t master_seed, int speaker, int k) {
  return derive_seed(master_seed, {kUtteranceStream, static_cast<std::uint64_t>(speaker),
                                   static_cast<std::uint64_t>(k)});
}

std::vector<ManifestEntry> generate_corpus(const CorpusSpec &spec,
                                           const std::filesystem::path &out_dir) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::IoFailure, "cannot create " + out_dir.string() + ": " + ec.message());
  const std::vector<SpeakerProfile> profiles = make_speaker_profiles(spec.num_speakers, spec.master_seed);
  const int per = 1 + spec.test_clips_per_speaker;

  std::vector<ManifestEntry> entries(static_cast<std::size_t>(spec.num_speakers));
  for (int s = 0; s < spec.num_speakers; ++s) {
    ManifestEntry &e = entries[s];
    e.speaker_id = profiles[s].speaker_id;
    e.master_seed = spec.master_seed;
    e.train.push_back(std::filesystem::path(e.speaker_id) / "train.wav");
    for (int k = 0; k < spec.test_clips_per_speaker; ++k)
      e.test.push_back(std::filesystem::path(e.speaker_id) / ("test_" + std::to_string(k) + ".wav"));
    std::filesystem::create_directories(out_dir / e.speaker_id, ec);
    if (ec) fail(ErrorCode::IoFailure, "cannot create " + (out_dir / e.speaker_id).string());
  }

  const auto total = static_cast<std::ptrdiff_t>(entries.size()) * per;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(total));
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t idx = 0; idx < total; ++idx) {
    const int s = static_cast<int>(idx / per);
    const int k = static_cast<int>(idx % per);
    try {
      const ManifestEntry &e = entries[s];
      const double seconds = k == 0 ? spec.train_seconds : spec.test_clip_seconds;
      const std::filesystem::path &rel = k == 0 ? e.train[0] : e.test[k - 1];
      audio::write_wav(synthesize_utterance(profiles[s], seconds, utterance_seed(spec.master_seed, s, k)),
                       out_dir / rel);
    } catch (...) {
      errors[idx] = std::current_exception();
    }
  }
  for (const auto &e : errors)
    if (e) std::rethrow_exception(e);

  const std::filesystem::path manifest = out_dir / kManifestName;
  std::ofstream out(manifest, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot create " + manifest.string());
  out << manifest_csv(entries);
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + manifest.string());
  return entries;
}

namespace {

std::string join_paths(const std::vector<std::filesystem::path> &paths) {
  std::string out;
  for (const auto &p : paths) out += (out.empty() ? "" : ";") + p.generic_string();
  return out;
}

std::vector<std::filesystem::path> split_paths(const std::string &field,
                                               const std::filesystem::path &base) {
  std::vector<std::filesystem::path> out;
  std::stringstream ss(field);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    std::filesystem::path p(item);
    out.push_back(p.is_relative() ? base / p : p);
  }
  return out;
}

}  // namespace

std::string manifest_csv(const std::vector<ManifestEntry> &entries) {
  std::string out = "speaker_id,train,test,master_seed\n";
  for (const ManifestEntry &e : entries)
    out += e.speaker_id + ',' + join_paths(e.train) + ',' + join_paths(e.test) + ',' +
           std::to_string(e.master_seed) + '\n';
  return out;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path &manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + manifest_path.string());
  const std::filesystem::path base = manifest_path.parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("speaker_id,", 0) == 0) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 4 || f[0].empty())
      fail(ErrorCode::InvalidArgument, manifest_path.string() + " line " + std::to_string(lineno) +
                                           ": expected speaker_id,train,test,master_seed");
    ManifestEntry e;
    e.speaker_id = f[0];
    e.train = split_paths(f[1], base);
    e.test = split_paths(f[2], base);
    e.master_seed = std::strtoull(f[3].c_str(), nullptr, 10);
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace residual_id::synth
