// src/recog.cpp

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

#include "residual_id/recog.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "residual_id/error.hpp"

namespace residual_id::recog {

namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

void check_models(std::span<const SpeakerModel> models, std::uint64_t fingerprint) {
  if (models.empty()) fail(ErrorCode::EmptyModelSet, "no enrolled models");
  for (const SpeakerModel &m : models)
    if (m.feature_fingerprint != fingerprint)
      fail(ErrorCode::FingerprintMismatch,
           "model '" + m.speaker_id + "' was trained with a different feature configuration");
}

bool same_spec(const ModelSpec &a, const ModelSpec &b) {
  return a.kind == b.kind && a.num_states == b.num_states &&
         a.mixture_total == b.mixture_total && a.topology == b.topology;
}

bool same_cell(const CellKey &a, const CellKey &b) {
  return same_spec(a.spec, b.spec) && a.duration_s == b.duration_s;
}

// Model file reader ---------------------------------------------------------

class LineReader {
 public:
  explicit LineReader(const std::string &text) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines_.push_back(line);
    }
  }

  [[noreturn]] void corrupt(const std::string &what) const {
    fail(ErrorCode::CorruptModel, "line " + std::to_string(pos_) + ": " + what);
  }

  std::vector<std::string> next(const std::string &label, std::size_t values) {
    if (pos_ >= lines_.size()) corrupt("file truncated, expected '" + label + "'");
    std::istringstream in(lines_[pos_++]);
    std::vector<std::string> tok;
    std::string t;
    while (in >> t) tok.push_back(t);
    std::vector<std::string> want = split(label, ' ');
    if (tok.size() != want.size() + values) corrupt("expected '" + label + "' with " +
                                                    std::to_string(values) + " values");
    for (std::size_t i = 0; i < want.size(); ++i)
      if (tok[i] != want[i]) corrupt("expected '" + label + "', found '" + tok[i] + "'");
    return {tok.begin() + static_cast<std::ptrdiff_t>(want.size()), tok.end()};
  }

  std::string next_word(const std::string &label) { return next(label, 1).front(); }

  long next_int(const std::string &label) {
    const std::string s = next_word(label);
    char *end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0') corrupt("'" + label + "' is not an integer");
    return v;
  }

  std::vector<double> next_doubles(const std::string &label, std::size_t count) {
    std::vector<double> out;
    for (const std::string &s : next(label, count)) {
      char *end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (end == s.c_str() || *end != '\0') corrupt("'" + label + "' holds a malformed number");
      out.push_back(v);
    }
    return out;
  }

  const std::string *first() const { return lines_.empty() ? nullptr : &lines_.front(); }
  void skip() { ++pos_; }

 private:
  std::vector<std::string> lines_;
  std::size_t pos_ = 0;
};

void append_row(std::string &out, const std::string &label, std::span<const double> values) {
  out += label;
  for (double v : values) {
    out += ' ';
    out += fmt17(v);
  }
  out += '\n';
}

}  // namespace

const char *model_kind_name(ModelKind k) { return k == ModelKind::gmm ? "gmm" : "hmm"; }

ModelKind parse_model_kind(const std::string &name) {
  if (name == "gmm") return ModelKind::gmm;
  if (name == "hmm") return ModelKind::hmm;
  fail(ErrorCode::InvalidArgument, "unknown model kind '" + name + "'");
}

void ModelSpec::validate() const {
  if (num_states < 1) fail(ErrorCode::InvalidArgument, "num_states must be >= 1");
  if (kind == ModelKind::gmm && num_states != 1)
    fail(ErrorCode::InvalidArgument, "a GMM has exactly one state");
  if (mixture_total < 1) fail(ErrorCode::InvalidArgument, "mixture_total must be >= 1");
  if (mixture_total % num_states != 0)
    fail(ErrorCode::IndivisibleComponents, std::to_string(mixture_total) +
                                               " components cannot be split over " +
                                               std::to_string(num_states) + " states");
}

std::string ModelSpec::label() const {
  if (kind == ModelKind::gmm) return "GMM";
  std::string s = "HMM" + std::to_string(num_states);
  if (topology == hmm::Topology::left_right) s += "-LR";
  return s;
}

bool valid_speaker_id(const std::string &id) {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '.' || c == '-';
  });
}

double SpeakerModel::score(const FeatureMatrix &x) const {
  if (const auto *g = std::get_if<gmm::GmmParams>(&params)) return gmm::gmm_score(*g, x);
  return hmm::forward_loglik(std::get<hmm::HmmParams>(params), x);
}

int SpeakerModel::dim() const {
  if (const auto *g = std::get_if<gmm::GmmParams>(&params)) return g->dim;
  return std::get<hmm::HmmParams>(params).dim();
}

SpeakerModel enroll_features(const std::string &speaker_id,
                             std::span<const FeatureMatrix> sequences, const ModelSpec &spec,
                             std::uint64_t feature_fingerprint, const gmm::EmConfig &cfg) {
  if (!valid_speaker_id(speaker_id))
    fail(ErrorCode::InvalidArgument, "speaker id '" + speaker_id + "' must match [A-Za-z0-9_.-]+");
  spec.validate();
  std::size_t frames = 0;
  for (const FeatureMatrix &s : sequences) frames += s.rows();
  if (frames < static_cast<std::size_t>(spec.mixture_total))
    fail(ErrorCode::InsufficientTrainingData,
         "speaker '" + speaker_id + "' has " + std::to_string(frames) + " frames for " +
             std::to_string(spec.mixture_total) + " components");

  SpeakerModel m;
  m.speaker_id = speaker_id;
  m.kind = spec.kind;
  m.feature_fingerprint = feature_fingerprint;
  if (spec.kind == ModelKind::gmm) {
    m.params = gmm::em_fit(FeatureMatrix::concatenate(sequences), spec.mixture_total, cfg).model;
  } else {
    std::vector<FeatureMatrix> nonempty;
    for (const FeatureMatrix &s : sequences)
      if (!s.empty()) nonempty.push_back(s);
    m.params = hmm::baum_welch_fit(nonempty, spec.num_states, spec.mixture_total, spec.topology,
                                   cfg)
                   .model;
  }
  return m;
}

SpeakerModel enroll(const std::string &speaker_id, std::span<const audio::AudioClip> clips,
                    const ModelSpec &spec, const FeatureConfig &feature_cfg,
                    const gmm::EmConfig &cfg) {
  if (clips.empty()) fail(ErrorCode::InsufficientTrainingData, "no training clips");
  std::vector<FeatureMatrix> seqs;
  for (const audio::AudioClip &c : clips) seqs.push_back(features::extract_features(c, feature_cfg));
  return enroll_features(speaker_id, seqs, spec, feature_cfg.fingerprint(), cfg);
}

Identification identify_features(std::span<const SpeakerModel> models, const FeatureMatrix &x,
                                 std::uint64_t active_fingerprint) {
  check_models(models, active_fingerprint);
  Identification id;
  double best = -std::numeric_limits<double>::infinity();
  for (const SpeakerModel &m : models) {
    double s = m.score(x);
    id.scores.emplace_back(m.speaker_id, s);
    if (std::isnan(s)) s = -std::numeric_limits<double>::infinity();
    if (id.predicted_id.empty() || s > best || (s == best && m.speaker_id < id.predicted_id)) {
      best = s;
      id.predicted_id = m.speaker_id;
    }
  }
  return id;
}

audio::AudioClip leading_segment(const audio::AudioClip &clip, double duration_s) {
  if (!(duration_s > 0.0)) fail(ErrorCode::InvalidArgument, "test duration must be positive");
  const auto n = static_cast<std::size_t>(std::llround(duration_s * clip.sample_rate_hz));
  if (n > clip.samples.size())
    fail(ErrorCode::ClipShorterThanRequested,
         "clip lasts " + fmt_g(clip.duration_s()) + " s, " + fmt_g(duration_s) + " s requested");
  audio::AudioClip out;
  out.sample_rate_hz = clip.sample_rate_hz;
  out.samples.assign(clip.samples.begin(), clip.samples.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

Identification identify(std::span<const SpeakerModel> models, const audio::AudioClip &clip,
                        double test_duration_s, const FeatureConfig &feature_cfg) {
  check_models(models, feature_cfg.fingerprint());
  const FeatureMatrix x =
      features::extract_features(leading_segment(clip, test_duration_s), feature_cfg);
  return identify_features(models, x, feature_cfg.fingerprint());
}

// Model store -------------------------------------------------------------

std::string serialize_model(const SpeakerModel &model) {
  hmm::HmmParams h = model.kind == ModelKind::gmm
                         ? hmm::wrap_gmm(std::get<gmm::GmmParams>(model.params))
                         : std::get<hmm::HmmParams>(model.params);
  const int n = h.num_states;
  const int d = h.dim();
  const int m = h.emissions.front().num_components;
  for (const auto &e : h.emissions)
    if (e.num_components != m)
      fail(ErrorCode::InvalidArgument, "states must share a component count");

  std::string out;
  out += kModelHeader;
  out += '\n';
  out += "speaker_id " + model.speaker_id + '\n';
  out += std::string("kind ") + model_kind_name(model.kind) + '\n';
  char fp[32];
  std::snprintf(fp, sizeof fp, "%016" PRIx64, model.feature_fingerprint);
  out += std::string("fingerprint ") + fp + '\n';
  out += "D " + std::to_string(d) + '\n';
  out += "N " + std::to_string(n) + '\n';
  out += "M " + std::to_string(m) + '\n';
  out += std::string("topology ") + hmm::topology_name(h.topology) + '\n';
  append_row(out, "pi", h.initial);
  for (int i = 0; i < n; ++i)
    append_row(out, "A " + std::to_string(i),
               std::span<const double>(h.transitions).subspan(static_cast<std::size_t>(i) * n, n));
  for (int j = 0; j < n; ++j) {
    const gmm::GmmParams &g = h.emissions[j];
    const std::string st = "state " + std::to_string(j);
    append_row(out, st + " weights", g.weights);
    for (int i = 0; i < m; ++i) append_row(out, st + " mean " + std::to_string(i), g.mean(i));
    for (int i = 0; i < m; ++i) append_row(out, st + " var " + std::to_string(i), g.variance(i));
  }
  out += "end\n";
  return out;
}

SpeakerModel parse_model(const std::string &text) {
  LineReader in(text);
  const std::string *head = in.first();
  if (head == nullptr) fail(ErrorCode::CorruptModel, "empty model file");
  if (*head != kModelHeader) {
    if (head->rfind("residual-id-model ", 0) == 0)
      fail(ErrorCode::UnknownFormatVersion, "unsupported model format '" + *head + "'");
    fail(ErrorCode::CorruptModel, "missing header line '" + std::string(kModelHeader) + "'");
  }
  in.skip();

  SpeakerModel model;
  model.speaker_id = in.next_word("speaker_id");
  if (!valid_speaker_id(model.speaker_id)) in.corrupt("invalid speaker id");
  const std::string kind = in.next_word("kind");
  if (kind != "gmm" && kind != "hmm") in.corrupt("unknown kind '" + kind + "'");
  model.kind = parse_model_kind(kind);
  const std::string fp = in.next_word("fingerprint");
  char *end = nullptr;
  model.feature_fingerprint = std::strtoull(fp.c_str(), &end, 16);
  if (fp.size() != 16 || *end != '\0') in.corrupt("malformed fingerprint");
  const long d = in.next_int("D");
  const long n = in.next_int("N");
  const long m = in.next_int("M");
  if (d < 1 || n < 1 || m < 1 || d > 100000 || n > 1000 || m > 100000)
    in.corrupt("D, N and M must be positive");
  if (model.kind == ModelKind::gmm && n != 1) in.corrupt("a gmm model must have N = 1");
  const std::string topo = in.next_word("topology");
  if (topo != "ergodic" && topo != "left_right") in.corrupt("unknown topology '" + topo + "'");

  hmm::HmmParams h;
  h.num_states = static_cast<int>(n);
  h.topology = hmm::parse_topology(topo);
  const auto nn = static_cast<std::size_t>(n);
  h.initial = in.next_doubles("pi", nn);
  for (long i = 0; i < n; ++i) {
    const std::vector<double> row = in.next_doubles("A " + std::to_string(i), nn);
    h.transitions.insert(h.transitions.end(), row.begin(), row.end());
  }
  for (long j = 0; j < n; ++j) {
    gmm::GmmParams g(static_cast<int>(m), static_cast<int>(d));
    const std::string st = "state " + std::to_string(j);
    g.weights = in.next_doubles(st + " weights", static_cast<std::size_t>(m));
    for (long i = 0; i < m; ++i) {
      const auto v = in.next_doubles(st + " mean " + std::to_string(i), static_cast<std::size_t>(d));
      std::copy(v.begin(), v.end(), g.mean(static_cast<int>(i)).begin());
    }
    for (long i = 0; i < m; ++i) {
      const auto v = in.next_doubles(st + " var " + std::to_string(i), static_cast<std::size_t>(d));
      std::copy(v.begin(), v.end(), g.variance(static_cast<int>(i)).begin());
    }
    h.emissions.push_back(std::move(g));
  }
  in.next("end", 0);

  const std::string violated = h.check(1e-9);
  if (!violated.empty()) fail(ErrorCode::CorruptModel, "invariant violated: " + violated);
  if (model.kind == ModelKind::gmm)
    model.params = h.emissions.front();
  else
    model.params = std::move(h);
  return model;
}

void save_model(const SpeakerModel &model, const std::filesystem::path &path) {
  const std::string text = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot create " + path.string());
  out << text;
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

SpeakerModel load_model(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

// Evaluation ----------------------------------------------------------------

EvalReport EvalReport::from_trials(std::vector<TrialRecord> trials) {
  EvalReport r;
  for (const TrialRecord &t : trials) {
    auto it = std::find_if(r.cells.begin(), r.cells.end(),
                           [&](const CellResult &c) { return same_cell(c.key, t.key); });
    if (it == r.cells.end()) {
      r.cells.push_back(CellResult{t.key, 0, 0});
      it = r.cells.end() - 1;
    }
    ++it->trials;
    if (t.error.empty() && t.predicted_id == t.true_id) ++it->correct;
  }
  r.trials = std::move(trials);
  return r;
}

EvalReport evaluate(std::span<const ModelSet> model_sets, std::span<const TestItem> test_set,
                    std::span<const double> durations_s, const FeatureConfig &feature_cfg) {
  if (model_sets.empty()) fail(ErrorCode::EmptyModelSet, "no model sets to evaluate");
  const std::uint64_t fingerprint = feature_cfg.fingerprint();
  const std::size_t nd = durations_s.size();
  const std::size_t nk = test_set.size();

  // Test features per (item, duration).
  std::vector<FeatureMatrix> feats(nk * nd);
  std::vector<std::string> feat_error(nk * nd);
  const auto nfeat = static_cast<std::ptrdiff_t>(nk * nd);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t idx = 0; idx < nfeat; ++idx) {
    const std::size_t k = static_cast<std::size_t>(idx) / nd;
    const std::size_t di = static_cast<std::size_t>(idx) % nd;
    try {
      feats[idx] = features::extract_features(leading_segment(test_set[k].clip, durations_s[di]),
                                              feature_cfg);
    } catch (const Error &e) {
      feat_error[idx] = error_code_name(e.code());
    } catch (const std::exception &e) {
      feat_error[idx] = "InternalError";
    }
  }

  const std::size_t total = model_sets.size() * nd * nk;
  std::vector<TrialRecord> trials(total);
  const auto ntrials = static_cast<std::ptrdiff_t>(total);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t idx = 0; idx < ntrials; ++idx) {
    const std::size_t s = static_cast<std::size_t>(idx) / (nd * nk);
    const std::size_t di = (static_cast<std::size_t>(idx) / nk) % nd;
    const std::size_t k = static_cast<std::size_t>(idx) % nk;
    TrialRecord &rec = trials[idx];
    rec.key = CellKey{model_sets[s].spec, durations_s[di]};
    rec.trial = static_cast<int>(k);
    rec.true_id = test_set[k].true_id;
    const std::size_t f = k * nd + di;
    if (!feat_error[f].empty()) {
      rec.error = feat_error[f];
      continue;
    }
    try {
      Identification id = identify_features(model_sets[s].models, feats[f], fingerprint);
      rec.predicted_id = std::move(id.predicted_id);
      rec.scores = std::move(id.scores);
    } catch (const Error &e) {
      rec.error = error_code_name(e.code());
    } catch (const std::exception &e) {
      rec.error = "InternalError";
    }
  }
  return EvalReport::from_trials(std::move(trials));
}

std::string report_csv(const EvalReport &report) {
  std::string out = "model_kind,num_states,mixture_total,test_duration_s,trials,correct,rate_percent\n";
  char buf[64];
  for (const CellResult &c : report.cells) {
    std::snprintf(buf, sizeof buf, "%.4f", c.rate_percent());
    out += std::string(model_kind_name(c.key.spec.kind)) + ',' +
           std::to_string(c.key.spec.num_states) + ',' + std::to_string(c.key.spec.mixture_total) +
           ',' + fmt_g(c.key.duration_s) + ',' + std::to_string(c.trials) + ',' +
           std::to_string(c.correct) + ',' + buf + '\n';
  }
  return out;
}

std::string trial_log_csv(const EvalReport &report) {
  std::string out =
      "model_kind,num_states,topology,mixture_total,test_duration_s,trial,true_id,predicted_id,"
      "status,scores\n";
  for (const TrialRecord &t : report.trials) {
    out += std::string(model_kind_name(t.key.spec.kind)) + ',' +
           std::to_string(t.key.spec.num_states) + ',' + hmm::topology_name(t.key.spec.topology) +
           ',' + std::to_string(t.key.spec.mixture_total) + ',' + fmt17(t.key.duration_s) + ',' +
           std::to_string(t.trial) + ',' + t.true_id + ',' + t.predicted_id + ',' +
           (t.error.empty() ? std::string("ok") : "failed:" + t.error) + ',';
    for (std::size_t i = 0; i < t.scores.size(); ++i) {
      if (i) out += ';';
      out += t.scores[i].first + '=' + fmt17(t.scores[i].second);
    }
    out += '\n';
  }
  return out;
}

EvalReport parse_trial_log(const std::string &csv) {
  std::istringstream in(csv);
  std::string line;
  std::vector<TrialRecord> trials;
  std::size_t lineno = 0;
  auto bad = [&](const std::string &what) {
    fail(ErrorCode::InvalidArgument, "trial log line " + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1) {
      if (line.rfind("model_kind,", 0) != 0) bad("missing header");
      continue;
    }
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != 10) bad("expected 10 fields");
    TrialRecord t;
    try {
      t.key.spec.kind = parse_model_kind(f[0]);
      t.key.spec.num_states = std::stoi(f[1]);
      t.key.spec.topology = hmm::parse_topology(f[2]);
      t.key.spec.mixture_total = std::stoi(f[3]);
      t.key.duration_s = std::stod(f[4]);
      t.trial = std::stoi(f[5]);
    } catch (const std::exception &) {
      bad("malformed cell fields");
    }
    t.true_id = f[6];
    t.predicted_id = f[7];
    if (f[8].rfind("failed:", 0) == 0)
      t.error = f[8].substr(7);
    else if (f[8] != "ok")
      bad("unknown status '" + f[8] + "'");
    if (!f[9].empty())
      for (const std::string &kv : split(f[9], ';')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) bad("malformed score '" + kv + "'");
        t.scores.emplace_back(kv.substr(0, eq), std::strtod(kv.c_str() + eq + 1, nullptr));
      }
    trials.push_back(std::move(t));
  }
  return EvalReport::from_trials(std::move(trials));
}

std::string render_table(const EvalReport &report) {
  std::vector<double> durations;
  std::vector<std::string> labels;
  std::set<int> mixtures;
  for (const CellResult &c : report.cells) {
    if (std::find(durations.begin(), durations.end(), c.key.duration_s) == durations.end())
      durations.push_back(c.key.duration_s);
    const std::string l = c.key.spec.label();
    if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
    mixtures.insert(c.key.spec.mixture_total);
  }
  std::sort(durations.begin(), durations.end());

  constexpr int kCol = 8;
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.insert(0, w - s.size(), ' ');
    return s;
  };
  const std::size_t group = labels.size() * kCol;
  std::string out = "Recognition rate (%)\n";
  std::string h1 = pad("", 10), h2 = pad("Mixtures", 10);
  for (double d : durations) {
    h1 += " |" + pad("Test " + fmt_g(d) + " s", group);
    h2 += " |";
    for (const std::string &l : labels) h2 += pad(l, kCol);
  }
  out += h1 + '\n' + h2 + '\n';
  out += std::string(h2.size(), '-') + '\n';
  for (int m : mixtures) {
    std::string row = pad(std::to_string(m), 10);
    for (double d : durations) {
      row += " |";
      for (const std::string &l : labels) {
        std::string cell = "-";
        for (const CellResult &c : report.cells)
          if (c.key.spec.mixture_total == m && c.key.duration_s == d && c.key.spec.label() == l) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%.1f", c.rate_percent());
            cell = buf;
          }
        row += pad(cell, kCol);
      }
    }
    out += row + '\n';
  }
  return out;
}

}  // namespace residual_id::recog
