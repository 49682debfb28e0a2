// residual_id/synth.hpp

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

#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "residual_id/audio_io.hpp"

namespace residual_id::synth {

inline constexpr int kSampleRate = 16000;

/// Shape of the two-piece polynomial glottal flow pulse. Within one period
/// the flow rises as 3x^2 - 2x^3 over open_quotient * asymmetry of the period,
/// falls as 1 - y^2 over the rest of the open phase, and is zero while closed.
struct GlottalShape {
  double open_quotient = 0.6;
  double asymmetry = 0.7;
};

/// One vocal-tract configuration: conjugate pole pairs, given by the pole in
/// the upper half plane.
struct PoleSet {
  std::vector<std::complex<double>> poles;
};

struct SpeakerProfile {
  std::string speaker_id;
  double pitch_hz = 120.0;
  double pitch_jitter = 0.01;  // relative std of each period
  GlottalShape glottal;
  std::vector<PoleSet> tract_pole_sets;
  double noise_floor = 0.02;  // aspiration noise relative to the pulse peak
};

/// Vowel-like tract configurations shared by every speaker of a corpus.
std::vector<PoleSet> tract_pool(std::uint64_t master_seed);

/// Profile `index`, resampled until it differs from every lower index by
/// >= 5 Hz in pitch and >= 0.05 in some glottal parameter.
SpeakerProfile make_speaker_profile(int index, std::uint64_t master_seed);
/// Profiles 0..count-1 (same values as make_speaker_profile, in one pass).
std::vector<SpeakerProfile> make_speaker_profiles(int count, std::uint64_t master_seed);

enum class SegmentKind { voiced, unvoiced, silence };

struct Segment {
  SegmentKind kind;
  std::size_t begin;
  std::size_t end;
};

struct Utterance {
  audio::AudioClip clip;
  std::vector<Segment> segments;
};

/// 16 kHz utterance alternating voiced stretches with unvoiced (~15%) and
/// silent (~10%) ones, filtered by a tract that steps through the
/// profile's configurations every 150-300 ms; peak-normalized to 0.9.
Utterance synthesize_annotated(const SpeakerProfile &profile, double duration_s,
                               std::uint64_t utterance_seed);
audio::AudioClip synthesize_utterance(const SpeakerProfile &profile, double duration_s,
                                      std::uint64_t utterance_seed);

struct CorpusSpec {
  int num_speakers = 20;
  double train_seconds = 30.0;
  int test_clips_per_speaker = 3;
  double test_clip_seconds = 6.0;
  std::uint64_t master_seed = 1;

  void validate() const;
};

/// Seed of utterance k of a speaker; k = 0 is the training clip.
std::uint64_t utterance_seed(std::uint64_t master_seed, int speaker, int k);

/// One speaker of a corpus and its clips.
struct ManifestEntry {
  std::string speaker_id;
  std::vector<std::filesystem::path> train;
  std::vector<std::filesystem::path> test;
  std::uint64_t master_seed = 0;
};

inline constexpr const char *kManifestName = "manifest.csv";

/// Writes <out_dir>/<speaker>/train.wav, test_<k>.wav and manifest.csv, one
/// row per speaker. Paths are relative to out_dir.
std::vector<ManifestEntry> generate_corpus(const CorpusSpec &spec,
                                           const std::filesystem::path &out_dir);

std::string manifest_csv(const std::vector<ManifestEntry> &entries);
/// Parses a manifest (speaker_id,train,test,master_seed with ';'-separated
/// paths); relative paths are resolved against the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path &manifest_path);

}  // namespace residual_id::synth
