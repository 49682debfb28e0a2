// tests/acceptance.cpp

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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Usage: acceptance [--workdir DIR] [--only N[,N...]]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "residual_id/error.hpp"
#include "residual_id/experiment.hpp"
#include "residual_id/lp.hpp"
#include "residual_id/parallel.hpp"

namespace fs = std::filesystem;
using namespace residual_id;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int g_failures = 0;

void report(const std::string &id, const std::string &title, const Outcome &o, double seconds,
            double limit_s) {
  const bool timed_ok = seconds < limit_s;
  const bool pass = o.pass && timed_ok;
  std::printf("%s criterion %s: %s [%s; %.2f s, limit %.0f s]\n", pass ? "PASS" : "FAIL", id.c_str(),
              title.c_str(), o.detail.c_str(), seconds, limit_s);
  std::fflush(stdout);
  g_failures += !pass;
}

void timed(const std::string &id, const std::string &title, double limit_s, const std::function<Outcome()> &fn) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception &e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  report(id, title, o, std::chrono::duration<double>(Clock::now() - t0).count(), limit_s);
}

std::string fmt(const char *f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Samples T frames from a GMM so the statistics resemble real training data.
features::FeatureMatrix sample_from(Rng &rng, const gmm::GmmParams &g, std::size_t t) {
  features::FeatureMatrix x(t, g.dim);
  for (std::size_t i = 0; i < t; ++i) {
    double u = rng.uniform();
    int c = 0;
    while (c + 1 < g.num_components && u >= g.weights[c]) u -= g.weights[c++];
    for (int k = 0; k < g.dim; ++k) x(i, k) = g.mean(c)[k] + std::sqrt(g.variance(c)[k]) * rng.normal();
  }
  return x;
}

Outcome criterion1() {
  Rng rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + static_cast<int>(rng.index(13));
    const int m = 1 + static_cast<int>(rng.index(32));
    const std::size_t t = 1 + rng.index(500);
    const auto g = oracle::random_gmm(rng, m, d);
    const auto x = oracle::random_features(rng, t, d);
    const double s = gmm::gmm_score(g, x);
    worst = std::max(worst, std::abs(hmm::forward_loglik(hmm::wrap_gmm(g), x) - s) / std::abs(s));
  }
  return {worst < 1e-8, "max relative difference " + fmt("%.3g", worst) + " (< 1e-8)"};
}

Outcome criterion2() {
  Rng rng(102);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(2));
    const int m = 1 + static_cast<int>(rng.index(2));
    const std::size_t t = 4 + rng.index(3);
    const int d = 1 + static_cast<int>(rng.index(4));
    const auto h = oracle::random_hmm(rng, n, m, d, trial % 4 == 3 ? hmm::Topology::left_right : hmm::Topology::ergodic);
    const auto x = oracle::random_features(rng, t, d, 1.5);
    const double ref = static_cast<double>(oracle::brute_force_loglik(h, x));
    worst = std::max(worst, oracle::relative_diff(hmm::forward_loglik(h, x), ref));
  }
  return {worst < 1e-10, "max relative difference " + fmt("%.3g", worst) + " (< 1e-10)"};
}

Outcome criterion3() {
  Rng rng(103);
  double worst_drop = 0.0;
  int traces = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + static_cast<int>(rng.index(13));
    const auto truth = oracle::random_gmm(rng, 1 + static_cast<int>(rng.index(6)), d);
    const auto x = sample_from(rng, truth, 300 + rng.index(1500));
    gmm::EmConfig cfg;
    cfg.seed = rng.next_u64();
    const auto r = gmm::em_fit(x, 1 + static_cast<int>(rng.index(16)), cfg);
    for (std::size_t k = 1; k < r.trace.size(); ++k) worst_drop = std::max(worst_drop, r.trace[k - 1] - r.trace[k]);
    ++traces;
  }
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + static_cast<int>(rng.index(8));
    const int n = 2 + static_cast<int>(rng.index(2));
    const auto truth = oracle::random_gmm(rng, 4, d);
    std::vector<features::FeatureMatrix> seqs;
    for (int s = 0, count = 1 + static_cast<int>(rng.index(3)); s < count; ++s)
      seqs.push_back(sample_from(rng, truth, 200 + rng.index(400)));
    gmm::EmConfig cfg;
    cfg.seed = rng.next_u64();
    const auto topo = trial % 2 ? hmm::Topology::left_right : hmm::Topology::ergodic;
    const auto r = hmm::baum_welch_fit(seqs, n, n * (1 + static_cast<int>(rng.index(3))), topo, cfg);
    for (std::size_t k = 1; k < r.trace.size(); ++k) worst_drop = std::max(worst_drop, r.trace[k - 1] - r.trace[k]);
    ++traces;
  }
  return {worst_drop <= 1e-6, std::to_string(traces) + " traces, largest decrease " + fmt("%.3g", worst_drop) +
                                  " (<= 1e-6)"};
}

Outcome criterion4() {
  Rng rng(104);
  double worst_coef = 0.0, worst_exc = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = oracle::random_stable_ar(rng, 12);
    std::vector<double> u(4096), mem(12);
    for (double &v : u) v = rng.normal();
    for (double &v : mem) v = rng.normal();
    const auto s = lp::synthesize(u, a, mem);
    const auto r = lp::autocorrelate(s, 12);
    const auto model = lp::levinson_durbin(r, 12);
    const auto ref = oracle::toeplitz_solve(r, 12);
    for (int k = 0; k < 12; ++k) worst_coef = std::max(worst_coef, oracle::relative_diff(model.coeffs[k], ref[k]));
    lp::LpModel truth;
    truth.order = 12;
    truth.coeffs = a;
    const auto e = lp::inverse_filter(s, truth, mem);
    for (std::size_t n = 0; n < u.size(); ++n) worst_exc = std::max(worst_exc, std::abs(e[n] - u[n]));
  }
  return {worst_coef < 1e-8 && worst_exc < 1e-10,
          "max coefficient relative difference " + fmt("%.3g", worst_coef) + " (< 1e-8), max excitation error " +
              fmt("%.3g", worst_exc) + " (< 1e-10)"};
}

Outcome criterion5(const std::vector<synth::SpeakerProfile> &profiles, std::uint64_t master) {
  int tested = 0, flatter = 0;
  double min_ratio = 1e300;
  for (std::size_t s = 0; s < profiles.size(); ++s) {
    const auto utt = synth::synthesize_annotated(profiles[s], 30.0, synth::utterance_seed(master, static_cast<int>(s), 0));
    const auto res = lp::residual_of_clip(utt.clip, audio::FrameSpec{});
    for (const auto &seg : utt.segments) {
      if (seg.kind != synth::SegmentKind::voiced) continue;
      const std::size_t end = std::min(seg.end, res.samples.size());
      if (end < seg.begin + 512) continue;
      const std::span<const double> sig(utt.clip.samples.data() + seg.begin, end - seg.begin);
      const std::span<const double> r(res.samples.data() + seg.begin, end - seg.begin);
      const double fr = oracle::spectral_flatness(r), fs = oracle::spectral_flatness(sig);
      ++tested;
      flatter += fr > fs;
      min_ratio = std::min(min_ratio, fr / fs);
    }
  }
  return {tested >= 100 && flatter == tested,
          std::to_string(flatter) + "/" + std::to_string(tested) + " voiced segments flatter, min ratio " +
              fmt("%.3g", min_ratio)};
}

Outcome criterion6(const std::vector<synth::SpeakerProfile> &profiles, std::uint64_t master) {
  int within = 0;
  double worst = 0.0;
  for (std::size_t s = 0; s < profiles.size(); ++s) {
    const auto clip = synth::synthesize_utterance(profiles[s], 30.0, synth::utterance_seed(master, static_cast<int>(s), 0));
    const auto res = lp::residual_of_clip(clip, audio::FrameSpec{});
    const double f0 = oracle::autocorrelation_pitch_hz(res.samples, 16000);
    const double err = std::abs(f0 - profiles[s].pitch_hz) / profiles[s].pitch_hz;
    worst = std::max(worst, err);
    within += err <= 0.10;
  }
  return {within == static_cast<int>(profiles.size()),
          std::to_string(within) + "/" + std::to_string(profiles.size()) + " speakers within 10%, worst " +
              fmt("%.2f", 100 * worst) + "%"};
}

using RateTable = std::map<std::tuple<int, int, int, double>, double>;  // kind, N, M, duration

RateTable rates_of(const recog::EvalReport &r) {
  RateTable t;
  for (const auto &c : r.cells)
    t[{static_cast<int>(c.key.spec.kind), c.key.spec.num_states, c.key.spec.mixture_total, c.key.duration_s}] =
        c.rate_percent();
  return t;
}

void criterion7_and_8(const fs::path &work) {
  experiment::ExperimentConfig cfg =
      experiment::build_config(experiment::ConfigMap::parse(experiment::default_config_text(), "default"));
  cfg.output_dir = work / "grid_a";
  cfg.corpus_dir = cfg.output_dir / "corpus";
  fs::remove_all(cfg.output_dir);

  const auto t0 = Clock::now();
  recog::EvalReport rep;
  std::string error;
  try {
    rep = experiment::run_experiment(cfg).report;
  } catch (const std::exception &e) {
    error = e.what();
  }
  const double grid_s = std::chrono::duration<double>(Clock::now() - t0).count();
  if (!error.empty()) {
    for (const char *c : {"7a", "7b", "7c", "7d", "8"}) report(c, "grid", {false, "grid failed: " + error}, grid_s, 1800);
    return;
  }
  const RateTable t = rates_of(rep);
  const int gmm_k = static_cast<int>(recog::ModelKind::gmm), hmm_k = static_cast<int>(recog::ModelKind::hmm);
  const double trials = rep.cells.empty() ? 0 : rep.cells.front().trials;
  std::printf("grid: %zu cells, %.0f trials per cell, %.1f s\n%s", rep.cells.size(), trials, grid_s,
              recog::render_table(rep).c_str());

  {
    const double g = t.at({gmm_k, 1, 16, 3.0}), h = t.at({hmm_k, 2, 16, 3.0});
    report("7a", "16 mixtures, 3 s: both kinds >= 90%",
           {g >= 90.0 && h >= 90.0 && trials == 60,
            "GMM " + fmt("%.1f", g) + "%, HMM2 " + fmt("%.1f", h) + "%, " + fmt("%.0f", trials) + " trials/cell"},
           0.0, 1800);
  }
  {
    int violations = 0, checks = 0;
    std::string worst;
    for (const auto &[kind, n] : std::vector<std::pair<int, int>>{{gmm_k, 1}, {hmm_k, 2}})
      for (int m : cfg.mixture_totals) {
        const double r1 = t.at({kind, n, m, 1.0}), r3 = t.at({kind, n, m, 3.0}), r5 = t.at({kind, n, m, 5.0});
        checks += 2;
        if (r5 < r3 - 2.0 || r3 < r1 - 2.0) {
          ++violations;
          worst += " " + std::to_string(kind) + "/" + std::to_string(m);
        }
      }
    report("7b", "duration trend within 2 points",
           {violations == 0, std::to_string(checks - violations) + "/" + std::to_string(checks) + " steps hold" + worst},
           0.0, 1800);
  }
  {
    int violations = 0, cells = 0;
    double worst = 1e9;
    for (int m : cfg.mixture_totals)
      for (double d : cfg.durations_s) {
        const double diff = t.at({hmm_k, 2, m, d}) - t.at({gmm_k, 1, m, d});
        worst = std::min(worst, diff);
        ++cells;
        violations += diff < -2.0;
      }
    report("7c", "HMM2 >= GMM - 2 points in every cell",
           {violations == 0, std::to_string(cells - violations) + "/" + std::to_string(cells) +
                                 " cells hold, min HMM2-GMM " + fmt("%.1f", worst)},
           0.0, 1800);
  }
  report("7d", "full grid runtime", {true, "threads " + std::to_string(max_threads())}, grid_s, 1800);

  const auto t1 = Clock::now();
  Outcome o8;
  try {
    experiment::ExperimentConfig again = cfg;
    again.output_dir = work / "grid_b";
    again.corpus_dir = again.output_dir / "corpus";
    fs::remove_all(again.output_dir);
    experiment::run_experiment(again);
    const std::string a = slurp(cfg.output_dir / "report.csv"), b = slurp(again.output_dir / "report.csv");
    o8 = {!a.empty() && a == b, a == b ? "report.csv byte-identical (" + std::to_string(a.size()) + " bytes)"
                                       : "report.csv differs"};
  } catch (const std::exception &e) {
    o8 = {false, e.what()};
  }
  report("8", "rerun with the same master seed", o8, std::chrono::duration<double>(Clock::now() - t1).count(), 1800);
}

Outcome criterion9() {
  Rng rng(109);
  double worst = 0.0;
  const std::string text_dir = (fs::temp_directory_path() / "residual_id_acceptance_models").string();
  fs::create_directories(text_dir);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + static_cast<int>(rng.index(13));
    recog::SpeakerModel m;
    m.speaker_id = "spk" + std::to_string(trial);
    m.feature_fingerprint = rng.next_u64();
    if (trial % 2) {
      m.kind = recog::ModelKind::hmm;
      const int n = 2 + static_cast<int>(rng.index(3));
      m.params = oracle::random_hmm(rng, n, 1 + static_cast<int>(rng.index(8)), d,
                                    trial % 4 == 3 ? hmm::Topology::left_right : hmm::Topology::ergodic);
    } else {
      m.params = oracle::random_gmm(rng, 1 + static_cast<int>(rng.index(32)), d);
    }
    const fs::path p = fs::path(text_dir) / "m.model";
    recog::save_model(m, p);
    const auto back = recog::load_model(p);
    for (int k = 0; k < 3; ++k) {
      const auto x = oracle::random_features(rng, 1 + rng.index(200), d);
      worst = std::max(worst, oracle::relative_diff(back.score(x), m.score(x)));
    }
  }
  fs::remove_all(text_dir);
  return {worst < 1e-12, "max relative score drift " + fmt("%.3g", worst) + " (< 1e-12)"};
}

Outcome criterion10() {
  Rng rng(110);
  const auto bank = features::build_filterbank(24, 512, 16000, 0.0, 8000.0);
  const features::MfccComputer mc(bank, 320, 13);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> f(320);
    // mix of noise and a random tone so frames are not all white
    const double w = rng.uniform(0.01, 3.0);
    for (int n = 0; n < 320; ++n) f[n] = rng.normal() * 0.1 + std::sin(w * n);
    const auto c = mc.compute(f);
    for (double scale : {0.5, 2.0, 10.0}) {
      auto g = f;
      for (double &v : g) v *= scale;
      const auto cs = mc.compute(g);
      for (int j = 0; j < 13; ++j) worst = std::max(worst, std::abs(cs[j] - c[j]));
    }
  }
  return {worst < 1e-9, "max |delta c_j| " + fmt("%.3g", worst) + " (< 1e-9)"};
}

}  // namespace

int main(int argc, char **argv) {
  fs::path work = fs::temp_directory_path() / "residual_id_acceptance";
  std::set<std::string> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--workdir" && i + 1 < argc) {
      work = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ',')) only.insert(item);
    } else {
      std::fprintf(stderr, "usage: acceptance [--workdir DIR] [--only N[,N...]]\n");
      return 2;
    }
  }
  configure_threads_from_env();
  fs::create_directories(work);
  auto want = [&](const char *id) { return only.empty() || only.count(id); };

  const std::uint64_t master = 20100101;
  const auto profiles = synth::make_speaker_profiles(20, master);

  if (want("1")) timed("1", "1-state HMM equals GMM score", 10, criterion1);
  if (want("2")) timed("2", "forward equals exhaustive path sum", 10, criterion2);
  if (want("3")) timed("3", "EM and Baum-Welch traces non-decreasing", 60, criterion3);
  if (want("4")) timed("4", "Levinson-Durbin vs Toeplitz solve, inverse filtering", 30, criterion4);
  if (want("5")) timed("5", "residual flatter than signal on voiced segments", 30, [&] { return criterion5(profiles, master); });
  if (want("6")) timed("6", "residual pitch within 10% of profile pitch", 60, [&] { return criterion6(profiles, master); });
  if (want("7") || want("8")) criterion7_and_8(work);
  if (want("9")) timed("9", "model save/load score drift", 60, criterion9);
  if (want("10")) timed("10", "MFCC invariance to amplitude scaling", 60, criterion10);

  std::printf("%s: %d criterion line(s) failed\n", g_failures ? "FAIL" : "PASS", g_failures);
  return g_failures ? 1 : 0;
}
