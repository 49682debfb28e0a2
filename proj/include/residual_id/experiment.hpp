// residual_id/experiment.hpp

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
#include <map>
#include <string>
#include <vector>

#include "residual_id/features.hpp"
#include "residual_id/gmm.hpp"
#include "residual_id/hmm.hpp"
#include "residual_id/recog.hpp"
#include "residual_id/synth.hpp"

namespace residual_id::experiment {

/// Line-oriented `key = value` configuration. `#` starts a comment. Later
/// assignments (including --set overrides) replace earlier ones.
class ConfigMap {
 public:
  struct Entry {
    std::string value;
    std::string origin;  // "<file>:<line>" or "--set"
  };

  static ConfigMap parse(const std::string &text, const std::string &source);
  static ConfigMap parse_file(const std::filesystem::path &path);

  /// Applies one "key=value" override.
  void set_override(const std::string &assignment);
  void set(const std::string &key, const std::string &value, const std::string &origin);

  bool has(const std::string &key) const { return entries_.count(key) != 0; }
  const std::map<std::string, Entry> &entries() const { return entries_; }

  /// Value or fallback; values of unknown keys are rejected by the config builder.
  std::string get(const std::string &key, const std::string &fallback = "") const;

 private:
  std::map<std::string, Entry> entries_;
};

/// One model family of the grid, trained at every mixture total.
struct GridModel {
  recog::ModelKind kind = recog::ModelKind::gmm;
  int num_states = 1;
  hmm::Topology topology = hmm::Topology::ergodic;
};

struct ExperimentConfig {
  features::FeatureConfig feature;
  int em_max_iters = 100;
  double em_rel_tol = 1e-5;
  double variance_floor_factor = 1e-4;
  std::vector<GridModel> models{{recog::ModelKind::gmm, 1, hmm::Topology::ergodic},
                                {recog::ModelKind::hmm, 2, hmm::Topology::ergodic}};
  std::vector<int> mixture_totals{4, 8, 16, 32};
  std::vector<double> durations_s{1.0, 3.0, 5.0};
  synth::CorpusSpec corpus;
  std::uint64_t master_seed = 20100101;
  std::filesystem::path corpus_manifest;  // empty: synthesize into corpus_dir
  std::filesystem::path corpus_dir = "out/corpus";
  std::filesystem::path output_dir = "out";
  /// Subcommand-specific keys (input, output, speaker_id, ...), kept verbatim.
  std::map<std::string, std::string> extra;

  /// Checks cross-field invariants; throws ConfigParseError.
  void validate() const;
  /// Complete `key = value` rendering that parses back to this config.
  std::string render() const;
  std::uint64_t hash() const;

  gmm::EmConfig em_config(std::uint64_t seed) const;
  std::vector<recog::ModelSpec> model_specs() const;
};

/// Builds and validates a config; errors name the key and its origin.
ExperimentConfig build_config(const ConfigMap &map);

/// Seed of the model trained for `speaker_index` in a grid cell.
std::uint64_t model_seed(std::uint64_t master_seed, std::size_t speaker_index,
                         const recog::ModelSpec &spec);

struct ExperimentOutputs {
  recog::EvalReport report;
  std::filesystem::path report_csv;
  std::filesystem::path trial_log;
  std::filesystem::path table;
  std::filesystem::path summary;
};

/// Corpus (generated or loaded), enrollment of every speaker in every grid
/// cell, evaluation, and report files in output_dir: report.csv, trials.csv,
/// table.txt, run_summary.txt and config_used.cfg.
ExperimentOutputs run_experiment(const ExperimentConfig &cfg);

/// The desk-scale default configuration as shipped in configs/default.cfg.
std::string default_config_text();

}  // namespace residual_id::experiment
