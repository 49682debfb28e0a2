// src/experiment.cpp

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

#include "residual_id/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>

#include "residual_id/error.hpp"
#include "residual_id/rng.hpp"

namespace residual_id::experiment {

namespace {

constexpr std::uint64_t kModelStream = 4;

const std::set<std::string> &known_keys() {
  static const std::set<std::string> keys = {
      // features
      "frame_ms", "shift_ms", "window", "lp_order", "fft_size", "num_filters", "num_ceps",
      "f_low_hz", "f_high_hz", "voicing_threshold_db",
      // training
      "em_max_iters", "em_rel_tol", "variance_floor_factor",
      // grid
      "models", "mixture_totals", "durations_s",
      // corpus
      "num_speakers", "train_seconds", "test_clips_per_speaker", "test_clip_seconds",
      "corpus_manifest", "corpus_dir",
      // run
      "master_seed", "output_dir",
      // subcommands
      "input", "output", "speaker_id", "model_kind", "num_states", "mixture_total", "topology",
      "model_dir", "test_duration_s", "trial_log"};
  return keys;
}

const std::set<std::string> &extra_keys() {
  static const std::set<std::string> keys = {"input",        "output",        "speaker_id",
                                             "model_kind",   "num_states",    "mixture_total",
                                             "topology",     "model_dir",     "test_duration_s",
                                             "trial_log"};
  return keys;
}

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string &s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Reader {
 public:
  explicit Reader(const ConfigMap &map) : map_(map) {}

  [[noreturn]] void bad(const std::string &key, const std::string &what) const {
    std::string where;
    if (auto it = map_.entries().find(key); it != map_.entries().end())
      where = " (" + it->second.origin + ")";
    fail(ErrorCode::ConfigParseError, "key '" + key + "'" + where + ": " + what);
  }

  std::string str(const std::string &key, const std::string &fallback) const {
    return map_.get(key, fallback);
  }

  long integer(const std::string &key, long fallback) const {
    if (!map_.has(key)) return fallback;
    const std::string s = map_.get(key);
    char *end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0') bad(key, "expected an integer, got '" + s + "'");
    return v;
  }

  std::uint64_t unsigned64(const std::string &key, std::uint64_t fallback) const {
    if (!map_.has(key)) return fallback;
    const std::string s = map_.get(key);
    char *end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0' || s[0] == '-') bad(key, "expected a non-negative integer, got '" + s + "'");
    return v;
  }

  double real(const std::string &key, double fallback) const {
    if (!map_.has(key)) return fallback;
    return parse_real(key, map_.get(key));
  }

  double parse_real(const std::string &key, const std::string &s) const {
    char *end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0') bad(key, "expected a number, got '" + s + "'");
    return v;
  }

 private:
  const ConfigMap &map_;
};

std::string grid_model_text(const GridModel &m) {
  if (m.kind == recog::ModelKind::gmm) return "gmm";
  return "hmm:" + std::to_string(m.num_states) + ":" + hmm::topology_name(m.topology);
}

void write_text(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot create " + path.string());
  out << text;
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

}  // namespace

ConfigMap ConfigMap::parse(const std::string &text, const std::string &source) {
  ConfigMap map;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string origin = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos)
      fail(ErrorCode::ConfigParseError, origin + ": expected 'key = value'");
    map.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), origin);
  }
  return map;
}

ConfigMap ConfigMap::parse_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ConfigParseError, "cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void ConfigMap::set_override(const std::string &assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    fail(ErrorCode::ConfigParseError, "--set expects key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), "--set");
}

void ConfigMap::set(const std::string &key, const std::string &value, const std::string &origin) {
  if (known_keys().count(key) == 0)
    fail(ErrorCode::ConfigParseError, origin + ": unknown key '" + key + "'");
  entries_[key] = Entry{value, origin};
}

std::string ConfigMap::get(const std::string &key, const std::string &fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second.value;
}

ExperimentConfig build_config(const ConfigMap &map) {
  Reader r(map);
  ExperimentConfig c;
  features::FeatureConfig &f = c.feature;
  f.frame.frame_len_ms = r.real("frame_ms", f.frame.frame_len_ms);
  f.frame.shift_ms = r.real("shift_ms", f.frame.shift_ms);
  const std::string window = r.str("window", "hamming");
  if (window != "hamming" && window != "rectangular") r.bad("window", "expected hamming or rectangular");
  f.frame.window = audio::parse_window(window);
  f.lp_order = static_cast<int>(r.integer("lp_order", f.lp_order));
  f.fft_size = static_cast<int>(r.integer("fft_size", f.fft_size));
  f.num_filters = static_cast<int>(r.integer("num_filters", f.num_filters));
  f.num_ceps = static_cast<int>(r.integer("num_ceps", f.num_ceps));
  f.f_low_hz = r.real("f_low_hz", f.f_low_hz);
  f.f_high_hz = r.real("f_high_hz", f.f_high_hz);
  f.voicing_threshold_db = r.real("voicing_threshold_db", f.voicing_threshold_db);

  c.em_max_iters = static_cast<int>(r.integer("em_max_iters", c.em_max_iters));
  c.em_rel_tol = r.real("em_rel_tol", c.em_rel_tol);
  c.variance_floor_factor = r.real("variance_floor_factor", c.variance_floor_factor);

  if (map.has("models")) {
    c.models.clear();
    for (const std::string &item : split_list(map.get("models"))) {
      std::vector<std::string> parts;
      std::stringstream ss(item);
      std::string p;
      while (std::getline(ss, p, ':')) parts.push_back(trim(p));
      GridModel m;
      if (parts[0] == "gmm" && parts.size() == 1) {
        m.kind = recog::ModelKind::gmm;
      } else if (parts[0] == "hmm" && parts.size() >= 2 && parts.size() <= 3) {
        m.kind = recog::ModelKind::hmm;
        char *end = nullptr;
        m.num_states = static_cast<int>(std::strtol(parts[1].c_str(), &end, 10));
        if (parts[1].empty() || *end != '\0' || m.num_states < 1)
          r.bad("models", "bad state count in '" + item + "'");
        if (parts.size() == 3) {
          if (parts[2] != "ergodic" && parts[2] != "left_right")
            r.bad("models", "bad topology in '" + item + "'");
          m.topology = hmm::parse_topology(parts[2]);
        }
      } else {
        r.bad("models", "expected gmm or hmm:<states>[:ergodic|left_right], got '" + item + "'");
      }
      c.models.push_back(m);
    }
    if (c.models.empty()) r.bad("models", "no models listed");
  }
  if (map.has("mixture_totals")) {
    c.mixture_totals.clear();
    for (const std::string &item : split_list(map.get("mixture_totals"))) {
      char *end = nullptr;
      const long v = std::strtol(item.c_str(), &end, 10);
      if (*end != '\0' || v < 1) r.bad("mixture_totals", "bad entry '" + item + "'");
      c.mixture_totals.push_back(static_cast<int>(v));
    }
    if (c.mixture_totals.empty()) r.bad("mixture_totals", "no mixture totals listed");
  }
  if (map.has("durations_s")) {
    c.durations_s.clear();
    for (const std::string &item : split_list(map.get("durations_s")))
      c.durations_s.push_back(r.parse_real("durations_s", item));
    if (c.durations_s.empty()) r.bad("durations_s", "no durations listed");
  }

  c.master_seed = r.unsigned64("master_seed", c.master_seed);
  c.corpus.num_speakers = static_cast<int>(r.integer("num_speakers", c.corpus.num_speakers));
  c.corpus.train_seconds = r.real("train_seconds", c.corpus.train_seconds);
  c.corpus.test_clips_per_speaker =
      static_cast<int>(r.integer("test_clips_per_speaker", c.corpus.test_clips_per_speaker));
  c.corpus.test_clip_seconds = r.real("test_clip_seconds", c.corpus.test_clip_seconds);
  c.corpus.master_seed = c.master_seed;
  c.corpus_manifest = r.str("corpus_manifest", "");
  c.output_dir = r.str("output_dir", c.output_dir.string());
  c.corpus_dir = r.str("corpus_dir", (c.output_dir / "corpus").string());

  for (const auto &[key, entry] : map.entries())
    if (extra_keys().count(key)) c.extra[key] = entry.value;

  // Re-raise validation problems as config errors that name the key.
  try {
    c.validate();
  } catch (const Error &e) {
    if (e.code() == ErrorCode::ConfigParseError) throw;
    fail(ErrorCode::ConfigParseError, e.detail());
  }
  return c;
}

void ExperimentConfig::validate() const {
  auto bad = [](const std::string &key, const std::string &what) {
    fail(ErrorCode::ConfigParseError, "key '" + key + "': " + what);
  };
  feature.validate();
  if (feature.lp_order < 1) bad("lp_order", "must be >= 1");
  if (em_max_iters < 1) bad("em_max_iters", "must be >= 1");
  if (!(em_rel_tol > 0.0)) bad("em_rel_tol", "must be > 0");
  if (!(variance_floor_factor >= 0.0)) bad("variance_floor_factor", "must be >= 0");
  for (double d : durations_s)
    if (!(d > 0.0)) bad("durations_s", "durations must be positive");
  for (const GridModel &m : models)
    if (m.kind == recog::ModelKind::hmm)
      for (int total : mixture_totals)
        if (total % m.num_states != 0)
          bad("mixture_totals", "mixture total " + std::to_string(total) +
                                    " is not divisible by the " + std::to_string(m.num_states) +
                                    "-state HMM");
  if (corpus_manifest.empty()) {
    corpus.validate();
    const double longest = durations_s.empty()
                               ? 0.0
                               : *std::max_element(durations_s.begin(), durations_s.end());
    if (corpus.test_clip_seconds < longest)
      bad("test_clip_seconds", "shorter than the longest test duration");
  }
}

std::string ExperimentConfig::render() const {
  std::string s;
  auto line = [&](const std::string &k, const std::string &v) { s += k + " = " + v + '\n'; };
  line("frame_ms", fmt17(feature.frame.frame_len_ms));
  line("shift_ms", fmt17(feature.frame.shift_ms));
  line("window", audio::window_name(feature.frame.window));
  line("lp_order", std::to_string(feature.lp_order));
  line("fft_size", std::to_string(feature.fft_size));
  line("num_filters", std::to_string(feature.num_filters));
  line("num_ceps", std::to_string(feature.num_ceps));
  line("f_low_hz", fmt17(feature.f_low_hz));
  line("f_high_hz", fmt17(feature.f_high_hz));
  line("voicing_threshold_db", fmt17(feature.voicing_threshold_db));
  line("em_max_iters", std::to_string(em_max_iters));
  line("em_rel_tol", fmt17(em_rel_tol));
  line("variance_floor_factor", fmt17(variance_floor_factor));
  std::string models_text, totals, durations;
  for (const GridModel &m : models) models_text += (models_text.empty() ? "" : ", ") + grid_model_text(m);
  for (int t : mixture_totals) totals += (totals.empty() ? "" : ", ") + std::to_string(t);
  for (double d : durations_s) durations += (durations.empty() ? "" : ", ") + fmt17(d);
  line("models", models_text);
  line("mixture_totals", totals);
  line("durations_s", durations);
  line("num_speakers", std::to_string(corpus.num_speakers));
  line("train_seconds", fmt17(corpus.train_seconds));
  line("test_clips_per_speaker", std::to_string(corpus.test_clips_per_speaker));
  line("test_clip_seconds", fmt17(corpus.test_clip_seconds));
  line("master_seed", std::to_string(master_seed));
  if (!corpus_manifest.empty()) line("corpus_manifest", corpus_manifest.string());
  line("corpus_dir", corpus_dir.string());
  line("output_dir", output_dir.string());
  for (const auto &[k, v] : extra) line(k, v);
  return s;
}

std::uint64_t ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : render()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

gmm::EmConfig ExperimentConfig::em_config(std::uint64_t seed) const {
  gmm::EmConfig em;
  em.max_iters = em_max_iters;
  em.rel_tol = em_rel_tol;
  em.variance_floor_factor = variance_floor_factor;
  em.seed = seed;
  return em;
}

std::vector<recog::ModelSpec> ExperimentConfig::model_specs() const {
  std::vector<recog::ModelSpec> specs;
  for (const GridModel &m : models)
    for (int total : mixture_totals)
      specs.push_back(recog::ModelSpec{m.kind, m.num_states, total, m.topology});
  return specs;
}

std::uint64_t model_seed(std::uint64_t master_seed, std::size_t speaker_index,
                         const recog::ModelSpec &spec) {
  return derive_seed(master_seed, {kModelStream, speaker_index,
                                   static_cast<std::uint64_t>(spec.kind),
                                   static_cast<std::uint64_t>(spec.num_states),
                                   static_cast<std::uint64_t>(spec.mixture_total),
                                   static_cast<std::uint64_t>(spec.topology)});
}

ExperimentOutputs run_experiment(const ExperimentConfig &cfg) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) fail(ErrorCode::IoFailure, "cannot create " + cfg.output_dir.string() + ": " + ec.message());
  write_text(cfg.output_dir / "config_used.cfg", cfg.render());

  std::filesystem::path manifest_path = cfg.corpus_manifest;
  if (manifest_path.empty()) {
    synth::generate_corpus(cfg.corpus, cfg.corpus_dir);
    manifest_path = cfg.corpus_dir / synth::kManifestName;
  }
  const std::vector<synth::ManifestEntry> manifest = synth::read_manifest(manifest_path);

  std::vector<std::string> speakers;
  std::vector<std::vector<std::filesystem::path>> train_paths;
  std::vector<recog::TestItem> tests;
  for (const synth::ManifestEntry &e : manifest) {
    if (std::find(speakers.begin(), speakers.end(), e.speaker_id) != speakers.end())
      fail(ErrorCode::InvalidArgument, "speaker '" + e.speaker_id + "' listed twice in " +
                                           manifest_path.string());
    speakers.push_back(e.speaker_id);
    train_paths.push_back(e.train);
    for (const auto &p : e.test) tests.push_back(recog::TestItem{e.speaker_id, audio::read_wav(p)});
  }

  const std::uint64_t fingerprint = cfg.feature.fingerprint();
  const std::size_t ns = speakers.size();
  std::vector<std::vector<features::FeatureMatrix>> train_feats(ns);
  std::vector<std::exception_ptr> errors(ns);
  const auto ns_signed = static_cast<std::ptrdiff_t>(ns);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t s = 0; s < ns_signed; ++s) {
    try {
      if (train_paths[s].empty())
        fail(ErrorCode::InsufficientTrainingData, "speaker '" + speakers[s] + "' has no training clip");
      for (const auto &p : train_paths[s])
        train_feats[s].push_back(features::extract_features(audio::read_wav(p), cfg.feature));
    } catch (...) {
      errors[s] = std::current_exception();
    }
  }
  for (const auto &e : errors)
    if (e) std::rethrow_exception(e);

  const std::vector<recog::ModelSpec> specs = cfg.model_specs();
  std::vector<recog::ModelSet> sets(specs.size());
  for (std::size_t c = 0; c < specs.size(); ++c) {
    sets[c].spec = specs[c];
    sets[c].models.resize(ns);
  }
  const std::size_t jobs = specs.size() * ns;
  std::vector<std::string> job_error(jobs);
  std::vector<ErrorCode> job_code(jobs, ErrorCode::InvalidArgument);
  const auto jobs_signed = static_cast<std::ptrdiff_t>(jobs);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t j = 0; j < jobs_signed; ++j) {
    const std::size_t c = static_cast<std::size_t>(j) / ns;
    const std::size_t s = static_cast<std::size_t>(j) % ns;
    try {
      sets[c].models[s] = recog::enroll_features(
          speakers[s], train_feats[s], specs[c], fingerprint,
          cfg.em_config(model_seed(cfg.master_seed, s, specs[c])));
    } catch (const Error &e) {
      job_error[j] = e.detail();
      job_code[j] = e.code();
    } catch (const std::exception &e) {
      job_error[j] = e.what();
    }
  }
  for (std::size_t j = 0; j < jobs; ++j)
    if (!job_error[j].empty())
      fail(job_code[j], "cell " + specs[j / ns].label() + "/" +
                            std::to_string(specs[j / ns].mixture_total) + ", speaker " +
                            speakers[j % ns] + ": " + job_error[j]);

  ExperimentOutputs out;
  out.report = recog::evaluate(sets, tests, cfg.durations_s, cfg.feature);
  out.report_csv = cfg.output_dir / "report.csv";
  out.trial_log = cfg.output_dir / "trials.csv";
  out.table = cfg.output_dir / "table.txt";
  out.summary = cfg.output_dir / "run_summary.txt";
  write_text(out.report_csv, recog::report_csv(out.report));
  write_text(out.trial_log, recog::trial_log_csv(out.report));
  write_text(out.table, recog::render_table(out.report));

  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(cfg.hash()));
  std::string summary;
  summary += "version = " RESIDUAL_ID_VERSION "\n";
  summary += std::string("config_hash = ") + hash + '\n';
  summary += "master_seed = " + std::to_string(cfg.master_seed) + '\n';
  summary += "speakers = " + std::to_string(ns) + '\n';
  summary += "test_clips = " + std::to_string(tests.size()) + '\n';
  summary += "cells = " + std::to_string(out.report.cells.size()) + '\n';
  std::size_t failed = 0;
  for (const auto &t : out.report.trials) failed += !t.error.empty();
  summary += "failed_trials = " + std::to_string(failed) + '\n';
  summary += "seed_derivation = profile(master, 2, speaker); utterance(master, 3, speaker, k); "
             "model(master, 4, speaker, kind, states, mixtures, topology)\n";
  write_text(out.summary, summary);
  return out;
}

std::string default_config_text() {
  return R"(# Desk-scale speaker identification grid on the synthetic corpus.

# Feature extraction
frame_ms = 20
shift_ms = 10
window = hamming
lp_order = 12
fft_size = 512
num_filters = 24
num_ceps = 13
f_low_hz = 0
f_high_hz = 0            # 0 = Nyquist
voicing_threshold_db = 30

# Training
em_max_iters = 100
em_rel_tol = 1e-5
variance_floor_factor = 1e-4

# Grid
models = gmm, hmm:2:ergodic
mixture_totals = 4, 8, 16, 32
durations_s = 1, 3, 5

# Corpus
num_speakers = 20
train_seconds = 30
test_clips_per_speaker = 3
test_clip_seconds = 6
master_seed = 20100101

output_dir = out
)";
}

}  // namespace residual_id::experiment
