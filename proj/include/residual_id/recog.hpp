// residual_id/recog.hpp

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
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "residual_id/audio_io.hpp"
#include "residual_id/features.hpp"
#include "residual_id/gmm.hpp"
#include "residual_id/hmm.hpp"

namespace residual_id::recog {

using features::FeatureConfig;
using features::FeatureMatrix;

enum class ModelKind { gmm, hmm };

const char *model_kind_name(ModelKind k);
ModelKind parse_model_kind(const std::string &name);

/// What to train: a GMM (num_states is 1) or an N-state HMM whose
/// mixture_total components are split evenly over the states.
struct ModelSpec {
  ModelKind kind = ModelKind::gmm;
  int num_states = 1;
  int mixture_total = 16;
  hmm::Topology topology = hmm::Topology::ergodic;

  void validate() const;
  /// "GMM" or "HMM<N>" (plus "-LR" for left-right models).
  std::string label() const;
};

/// Speaker ids are restricted to [A-Za-z0-9_.-]+ so they embed safely in the
/// model and CSV formats.
bool valid_speaker_id(const std::string &id);

struct SpeakerModel {
  std::string speaker_id;
  ModelKind kind = ModelKind::gmm;
  std::variant<gmm::GmmParams, hmm::HmmParams> params;
  std::uint64_t feature_fingerprint = 0;

  /// gmm_score or forward_loglik depending on the kind.
  double score(const FeatureMatrix &x) const;
  int dim() const;
};

/// Trains on features already extracted with the config whose fingerprint is
/// given. GMMs fit the concatenated frames; HMMs keep one sequence per clip.
SpeakerModel enroll_features(const std::string &speaker_id,
                             std::span<const FeatureMatrix> sequences, const ModelSpec &spec,
                             std::uint64_t feature_fingerprint, const gmm::EmConfig &cfg);

SpeakerModel enroll(const std::string &speaker_id, std::span<const audio::AudioClip> clips,
                    const ModelSpec &spec, const FeatureConfig &feature_cfg,
                    const gmm::EmConfig &cfg);

struct Identification {
  std::string predicted_id;
  std::vector<std::pair<std::string, double>> scores;  // in model order
};

/// Argmax over raw log-likelihoods; ties go to the lexicographically
/// smallest speaker id.
Identification identify_features(std::span<const SpeakerModel> models, const FeatureMatrix &x,
                                 std::uint64_t active_fingerprint);

/// Scores the leading test_duration_s seconds of the clip.
Identification identify(std::span<const SpeakerModel> models, const audio::AudioClip &clip,
                        double test_duration_s, const FeatureConfig &feature_cfg);

/// First round(duration * rate) samples; throws ClipShorterThanRequested.
audio::AudioClip leading_segment(const audio::AudioClip &clip, double duration_s);

// Model store -------------------------------------------------------------

inline constexpr const char *kModelHeader = "residual-id-model v1";

std::string serialize_model(const SpeakerModel &model);
SpeakerModel parse_model(const std::string &text);
void save_model(const SpeakerModel &model, const std::filesystem::path &path);
SpeakerModel load_model(const std::filesystem::path &path);

// Evaluation ----------------------------------------------------------------

struct ModelSet {
  ModelSpec spec;
  std::vector<SpeakerModel> models;
};

struct TestItem {
  std::string true_id;
  audio::AudioClip clip;
};

struct CellKey {
  ModelSpec spec;
  double duration_s = 0.0;
};

struct CellResult {
  CellKey key;
  int trials = 0;
  int correct = 0;
  double rate_percent() const { return trials ? 100.0 * correct / trials : 0.0; }
};

struct TrialRecord {
  CellKey key;
  int trial = 0;
  std::string true_id;
  std::string predicted_id;
  std::string error;  // empty when the trial ran; a failed trial counts as wrong
  std::vector<std::pair<std::string, double>> scores;
};

struct EvalReport {
  std::vector<CellResult> cells;
  std::vector<TrialRecord> trials;

  /// Rebuilds the cells from a trial log; cell order follows first appearance.
  static EvalReport from_trials(std::vector<TrialRecord> trials);
};

/// Every (model set, duration, test item) combination. Test features are
/// extracted once per (item, duration) and shared across model sets.
EvalReport evaluate(std::span<const ModelSet> model_sets, std::span<const TestItem> test_set,
                    std::span<const double> durations_s, const FeatureConfig &feature_cfg);

/// model_kind,num_states,mixture_total,test_duration_s,trials,correct,rate_percent
std::string report_csv(const EvalReport &report);
std::string trial_log_csv(const EvalReport &report);
EvalReport parse_trial_log(const std::string &csv);
/// Rows are mixture totals, column groups durations, sub-columns model kinds.
std::string render_table(const EvalReport &report);

}  // namespace residual_id::recog
