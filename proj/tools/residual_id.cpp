// tools/residual_id.cpp

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

// residual-id: corpus generation, feature export, enrollment, identification
// and the evaluation grid.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "residual_id/error.hpp"
#include "residual_id/experiment.hpp"
#include "residual_id/parallel.hpp"

namespace fs = std::filesystem;
using namespace residual_id;
using experiment::ExperimentConfig;

namespace {

const std::string &require(const ExperimentConfig &cfg, const std::string &key) {
  const auto it = cfg.extra.find(key);
  if (it == cfg.extra.end() || it->second.empty())
    fail(ErrorCode::ConfigParseError, "key '" + key + "' is required by this subcommand");
  return it->second;
}

std::string optional(const ExperimentConfig &cfg, const std::string &key, const std::string &fallback) {
  const auto it = cfg.extra.find(key);
  return it == cfg.extra.end() ? fallback : it->second;
}

std::vector<std::string> split_commas(const std::string &s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void write_file(const fs::path &path, const std::string &text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot create " + path.string());
  out << text;
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

std::string read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_synth(const ExperimentConfig &cfg) {
  std::size_t clips = 0;
  for (const auto &e : synth::generate_corpus(cfg.corpus, cfg.corpus_dir)) clips += e.train.size() + e.test.size();
  std::printf("wrote %zu clips to %s\n", clips, cfg.corpus_dir.string().c_str());
  return 0;
}

int cmd_extract(const ExperimentConfig &cfg) {
  const auto x = features::extract_features(audio::read_wav(require(cfg, "input")), cfg.feature);
  const std::string out = optional(cfg, "output", "");
  if (out.empty())
    std::fputs(x.to_csv().c_str(), stdout);
  else
    write_file(out, x.to_csv());
  return 0;
}

recog::ModelSpec spec_from(const ExperimentConfig &cfg) {
  recog::ModelSpec spec;
  spec.kind = recog::parse_model_kind(optional(cfg, "model_kind", "gmm"));
  spec.num_states = spec.kind == recog::ModelKind::gmm ? 1 : std::stoi(optional(cfg, "num_states", "2"));
  spec.mixture_total = std::stoi(optional(cfg, "mixture_total", "16"));
  spec.topology = hmm::parse_topology(optional(cfg, "topology", "ergodic"));
  spec.validate();
  return spec;
}

int cmd_train(const ExperimentConfig &cfg) {
  const std::string speaker = require(cfg, "speaker_id");
  std::vector<audio::AudioClip> clips;
  for (const std::string &p : split_commas(require(cfg, "input"))) clips.push_back(audio::read_wav(p));
  const recog::ModelSpec spec = spec_from(cfg);
  const auto model = recog::enroll(speaker, clips, spec, cfg.feature,
                                   cfg.em_config(experiment::model_seed(cfg.master_seed, 0, spec)));
  fs::path out = optional(cfg, "output", "");
  if (out.empty()) out = fs::path(optional(cfg, "model_dir", "models")) / (speaker + ".model");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  recog::save_model(model, out);
  std::printf("%s\n", out.string().c_str());
  return 0;
}

int cmd_identify(const ExperimentConfig &cfg) {
  const fs::path dir = require(cfg, "model_dir");
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto &e : fs::directory_iterator(dir, ec))
    if (e.path().extension() == ".model") files.push_back(e.path());
  if (ec) fail(ErrorCode::IoFailure, "cannot list " + dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());
  std::vector<recog::SpeakerModel> models;
  for (const auto &f : files) models.push_back(recog::load_model(f));
  const audio::AudioClip clip = audio::read_wav(require(cfg, "input"));
  const std::string dur = optional(cfg, "test_duration_s", "");
  const double d = dur.empty() ? clip.duration_s() : std::stod(dur);
  const auto id = recog::identify(models, clip, d, cfg.feature);
  std::printf("predicted %s\n", id.predicted_id.c_str());
  for (const auto &[who, score] : id.scores) std::printf("%s %.17g\n", who.c_str(), score);
  return 0;
}

int cmd_evaluate(const ExperimentConfig &cfg) {
  const auto out = experiment::run_experiment(cfg);
  std::fputs(recog::render_table(out.report).c_str(), stdout);
  return 0;
}

int cmd_report(const ExperimentConfig &cfg) {
  const fs::path log = optional(cfg, "trial_log", (cfg.output_dir / "trials.csv").string());
  const auto report = recog::parse_trial_log(read_file(log));
  write_file(cfg.output_dir / "report.csv", recog::report_csv(report));
  write_file(cfg.output_dir / "table.txt", recog::render_table(report));
  std::fputs(recog::render_table(report).c_str(), stdout);
  return 0;
}

void emit_error(const std::string &sub, const std::string &code, const std::string &message,
                const fs::path &out_dir) {
  nlohmann::json j{{"status", "error"}, {"subcommand", sub}, {"error", code}, {"message", message}};
  const std::string text = j.dump() + "\n";
  std::fputs(text.c_str(), stderr);
  if (out_dir.empty()) return;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  std::ofstream f(out_dir / "error.json", std::ios::trunc);
  if (f) f << text;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"LP-residual speaker identification toolkit"};
  app.set_version_flag("--version", RESIDUAL_ID_VERSION);
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  const std::vector<std::pair<const char *, const char *>> subs = {
      {"synth", "generate the synthetic corpus"},
      {"extract", "write residual MFCCs of one clip as CSV"},
      {"train", "enroll one speaker model"},
      {"identify", "identify one clip against a model directory"},
      {"evaluate", "run the full experiment grid"},
      {"report", "re-render the report from a trial log"}};
  for (const auto &[name, help] : subs) {
    auto *s = app.add_subcommand(name, help);
    s->add_option("--config", config_path, "key = value config file");
    s->add_option("--set", overrides, "override one key (key=value)")->take_all();
  }
  CLI11_PARSE(app, argc, argv);
  const std::string sub = app.get_subcommands().front()->get_name();

  fs::path out_dir;
  try {
    configure_threads_from_env();
    experiment::ConfigMap map = config_path.empty()
                                    ? experiment::ConfigMap::parse(experiment::default_config_text(), "<default>")
                                    : experiment::ConfigMap::parse_file(config_path);
    for (const auto &o : overrides) map.set_override(o);
    if (map.has("output_dir")) out_dir = map.get("output_dir");
    const ExperimentConfig cfg = experiment::build_config(map);
    out_dir = cfg.output_dir;
    if (sub == "synth") return cmd_synth(cfg);
    if (sub == "extract") return cmd_extract(cfg);
    if (sub == "train") return cmd_train(cfg);
    if (sub == "identify") return cmd_identify(cfg);
    if (sub == "evaluate") return cmd_evaluate(cfg);
    return cmd_report(cfg);
  } catch (const Error &e) {
    emit_error(sub, error_code_name(e.code()), e.detail(), out_dir);
  } catch (const std::exception &e) {
    emit_error(sub, "InvalidArgument", e.what(), out_dir);
  }
  return 1;
}
