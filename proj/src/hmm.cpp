// src/hmm.cpp

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

#include "residual_id/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "residual_id/error.hpp"
#include "residual_id/kernels.hpp"
#include "residual_id/rng.hpp"

namespace residual_id::hmm {

namespace {

constexpr double kStarvedOccupancy = 1e-6;
constexpr std::uint64_t kPartitionStream = 0x70617274ULL;

void check_sequence(const HmmParams &hmm, const FeatureMatrix &x) {
  if (x.empty()) fail(ErrorCode::EmptyFeatures, "no frames to score");
  if (x.dim() != static_cast<std::size_t>(hmm.dim()))
    fail(ErrorCode::DimensionMismatch, "features have dimension " + std::to_string(x.dim()) +
                                           ", model expects " + std::to_string(hmm.dim()));
}

// Per-frame emission log densities, T x N, and their per-frame maxima.
std::vector<double> emission_logs(const HmmParams &hmm, const FeatureMatrix &x) {
  const int n = hmm.num_states;
  const std::size_t t_len = x.rows();
  std::vector<double> out(t_len * n);
  std::vector<double> column(t_len);
  for (int j = 0; j < n; ++j) {
    kernels::frame_loglik(hmm.emissions[j], x, column);
    for (std::size_t t = 0; t < t_len; ++t) out[t * n + j] = column[t];
  }
  return out;
}

// Converts row t of log densities into shifted linear densities. The shift
// is the largest log density among states with predicted mass, so reachable
// states cannot all underflow; unreachable ones are capped at 1.
double shift_row(const double *logs, const double *pred, int n, double *linear) {
  double best = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < n; ++j)
    if (pred[j] > 0.0) best = std::max(best, logs[j]);
  if (!std::isfinite(best)) return best;
  for (int j = 0; j < n; ++j)
    linear[j] = std::exp(pred[j] > 0.0 ? logs[j] - best : std::min(logs[j] - best, 0.0));
  return best;
}

[[noreturn]] void impossible(std::size_t t) {
  fail(ErrorCode::ImpossibleObservation,
       "forward probability vanished at frame " + std::to_string(t));
}

struct SequenceStats {
  double loglik = 0.0;
  std::vector<double> initial;
  std::vector<double> xi;
  std::vector<kernels::GmmStats> emission;
};

SequenceStats sequence_stats(const HmmParams &hmm, const FeatureMatrix &x) {
  const ForwardBackward fb = forward_backward(hmm, x);
  const int n = hmm.num_states;
  SequenceStats s;
  s.loglik = fb.loglik;
  s.initial.assign(fb.gamma.begin(), fb.gamma.begin() + n);
  s.xi = fb.xi;
  std::vector<double> weights(x.rows());
  for (int j = 0; j < n; ++j) {
    for (std::size_t t = 0; t < x.rows(); ++t) weights[t] = fb.gamma[t * n + j];
    s.emission.push_back(kernels::accumulate(hmm.emissions[j], x, weights));
  }
  return s;
}

SequenceStats total_stats(const HmmParams &hmm, std::span<const FeatureMatrix> sequences) {
  std::vector<SequenceStats> per(sequences.size());
  const auto count = static_cast<std::ptrdiff_t>(sequences.size());
  // Exceptions cannot cross the parallel region; carry the first one out.
  std::vector<std::exception_ptr> errors(sequences.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t u = 0; u < count; ++u) {
    try {
      per[u] = sequence_stats(hmm, sequences[u]);
    } catch (...) {
      errors[u] = std::current_exception();
    }
  }
  for (const auto &e : errors)
    if (e) std::rethrow_exception(e);

  SequenceStats total = std::move(per.front());
  for (std::size_t u = 1; u < per.size(); ++u) {
    total.loglik += per[u].loglik;
    for (std::size_t i = 0; i < total.initial.size(); ++i) total.initial[i] += per[u].initial[i];
    for (std::size_t i = 0; i < total.xi.size(); ++i) total.xi[i] += per[u].xi[i];
    for (std::size_t j = 0; j < total.emission.size(); ++j) total.emission[j].add(per[u].emission[j]);
  }
  return total;
}

FeatureMatrix pooled(std::span<const FeatureMatrix> sequences) {
  if (sequences.empty()) fail(ErrorCode::TooFewFrames, "no training sequences");
  return FeatureMatrix::concatenate(sequences);
}

}  // namespace

const char *topology_name(Topology t) {
  return t == Topology::ergodic ? "ergodic" : "left_right";
}

Topology parse_topology(const std::string &name) {
  if (name == "ergodic") return Topology::ergodic;
  if (name == "left_right") return Topology::left_right;
  fail(ErrorCode::InvalidArgument, "unknown topology '" + name + "'");
}

bool transition_allowed(Topology topology, int from, int to) {
  return topology == Topology::ergodic || to >= from;
}

std::string HmmParams::check(double tolerance) const {
  if (num_states < 1) return "num_states must be >= 1";
  const auto n = static_cast<std::size_t>(num_states);
  if (transitions.size() != n * n) return "transition matrix is not N x N";
  if (initial.size() != n) return "initial distribution length differs from N";
  if (emissions.size() != n) return "emission count differs from N";
  double pi_sum = 0.0;
  for (double p : initial) {
    if (!(p >= 0.0) || !std::isfinite(p)) return "initial probability negative or non-finite";
    pi_sum += p;
  }
  if (std::abs(pi_sum - 1.0) > tolerance)
    return "initial distribution sums to " + std::to_string(pi_sum) + ", expected 1";
  for (int i = 0; i < num_states; ++i) {
    double row = 0.0;
    for (int j = 0; j < num_states; ++j) {
      const double v = a(i, j);
      if (!(v >= 0.0) || !std::isfinite(v)) return "transition probability negative or non-finite";
      if (!transition_allowed(topology, i, j) && v != 0.0)
        return "transition " + std::to_string(i) + "->" + std::to_string(j) +
               " violates the " + topology_name(topology) + " topology";
      row += v;
    }
    if (std::abs(row - 1.0) > tolerance)
      return "transition row " + std::to_string(i) + " sums to " + std::to_string(row) +
             ", expected 1";
  }
  if (topology == Topology::left_right)
    for (int i = 1; i < num_states; ++i)
      if (initial[i] != 0.0) return "left_right model must start in state 0";
  const int d = emissions.front().dim;
  for (const GmmParams &g : emissions) {
    if (g.dim != d) return "emission dimensions differ";
    std::string e = g.check(tolerance);
    if (!e.empty()) return "emission: " + e;
  }
  return {};
}

HmmParams wrap_gmm(const GmmParams &g) {
  HmmParams h;
  h.num_states = 1;
  h.topology = Topology::ergodic;
  h.transitions = {1.0};
  h.initial = {1.0};
  h.emissions = {g};
  return h;
}

HmmParams init_hmm(std::span<const FeatureMatrix> sequences, int num_states, int mixture_total,
                   Topology topology, std::uint64_t seed, double variance_floor_factor) {
  if (num_states < 1) fail(ErrorCode::InvalidArgument, "num_states must be >= 1");
  if (mixture_total < 1 || mixture_total % num_states != 0)
    fail(ErrorCode::IndivisibleComponents, std::to_string(mixture_total) +
                                               " components cannot be split over " +
                                               std::to_string(num_states) + " states");
  const int per_state = mixture_total / num_states;
  const FeatureMatrix all = pooled(sequences);
  if (all.rows() < static_cast<std::size_t>(mixture_total))
    fail(ErrorCode::TooFewFrames, std::to_string(all.rows()) + " frames for " +
                                      std::to_string(mixture_total) + " components");
  const std::vector<double> floor = gmm::variance_floor(all, variance_floor_factor);
  const std::size_t d = all.dim();

  HmmParams h;
  h.num_states = num_states;
  h.topology = topology;
  const auto n = static_cast<std::size_t>(num_states);
  h.transitions.assign(n * n, 0.0);
  for (int i = 0; i < num_states; ++i) {
    int allowed = 0;
    for (int j = 0; j < num_states; ++j) allowed += transition_allowed(topology, i, j);
    for (int j = 0; j < num_states; ++j)
      if (transition_allowed(topology, i, j)) h.transitions[i * n + j] = 1.0 / allowed;
  }
  h.initial.assign(n, 0.0);
  if (topology == Topology::ergodic)
    std::fill(h.initial.begin(), h.initial.end(), 1.0 / num_states);
  else
    h.initial[0] = 1.0;

  if (num_states == 1) {
    h.emissions.push_back(gmm::kmeans_init(all, per_state, seed, floor));
    return h;
  }

  const gmm::KMeansResult part = gmm::kmeans(all, num_states, mix_seed(seed ^ kPartitionStream));
  for (int i = 0; i < num_states; ++i) {
    FeatureMatrix cluster(0, d);
    std::vector<char> used(all.rows(), 0);
    for (std::size_t t = 0; t < all.rows(); ++t)
      if (part.assignment[t] == i) {
        cluster.append_row(all.row(t));
        used[t] = 1;
      }
    if (cluster.rows() < static_cast<std::size_t>(per_state)) {
      // Borrow the nearest outside frames so every state can seed its mixture.
      std::vector<std::pair<double, std::size_t>> near;
      const double *c = part.centers.data() + static_cast<std::size_t>(i) * d;
      for (std::size_t t = 0; t < all.rows(); ++t) {
        if (used[t]) continue;
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) s += (all(t, k) - c[k]) * (all(t, k) - c[k]);
        near.emplace_back(s, t);
      }
      std::sort(near.begin(), near.end());
      for (std::size_t r = 0; cluster.rows() < static_cast<std::size_t>(per_state); ++r)
        cluster.append_row(all.row(near[r].second));
    }
    h.emissions.push_back(gmm::kmeans_init(cluster, per_state, seed + static_cast<std::uint64_t>(i), floor));
  }
  return h;
}

ForwardBackward forward_backward(const HmmParams &hmm, const FeatureMatrix &x) {
  check_sequence(hmm, x);
  const int n = hmm.num_states;
  const std::size_t t_len = x.rows();
  const std::vector<double> logs = emission_logs(hmm, x);

  std::vector<double> b(t_len * n);  // shifted linear densities
  std::vector<double> alpha(t_len * n);
  std::vector<double> scale(t_len);
  ForwardBackward fb;

  std::vector<double> pred(n);
  for (std::size_t t = 0; t < t_len; ++t) {
    for (int j = 0; j < n; ++j) {
      if (t == 0) {
        pred[j] = hmm.initial[j];
      } else {
        pred[j] = 0.0;
        for (int i = 0; i < n; ++i) pred[j] += alpha[(t - 1) * n + i] * hmm.a(i, j);
      }
    }
    const double shift = shift_row(&logs[t * n], pred.data(), n, &b[t * n]);
    if (!std::isfinite(shift)) impossible(t);
    double c = 0.0;
    for (int j = 0; j < n; ++j) {
      alpha[t * n + j] = pred[j] * b[t * n + j];
      c += alpha[t * n + j];
    }
    if (!(c > 0.0) || !std::isfinite(c)) impossible(t);
    for (int j = 0; j < n; ++j) alpha[t * n + j] /= c;
    scale[t] = c;
    fb.loglik += std::log(c) + shift;
  }

  std::vector<double> beta(t_len * n, 1.0);
  for (std::size_t t = t_len - 1; t-- > 0;) {
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += hmm.a(i, j) * b[(t + 1) * n + j] * beta[(t + 1) * n + j];
      beta[t * n + i] = s / scale[t + 1];
    }
  }

  fb.gamma.resize(t_len * n);
  for (std::size_t t = 0; t < t_len; ++t) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      fb.gamma[t * n + j] = alpha[t * n + j] * beta[t * n + j];
      s += fb.gamma[t * n + j];
    }
    for (int j = 0; j < n; ++j) fb.gamma[t * n + j] /= s;
  }

  fb.xi.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (std::size_t t = 0; t + 1 < t_len; ++t)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        fb.xi[i * n + j] += alpha[t * n + i] * hmm.a(i, j) * b[(t + 1) * n + j] *
                            beta[(t + 1) * n + j] / scale[t + 1];
  return fb;
}

double forward_loglik(const HmmParams &hmm, const FeatureMatrix &x) {
  check_sequence(hmm, x);
  const int n = hmm.num_states;
  const std::size_t t_len = x.rows();
  const std::vector<double> logs = emission_logs(hmm, x);
  std::vector<double> prev(n), cur(n), b(n), pred(n);
  double loglik = 0.0;
  for (std::size_t t = 0; t < t_len; ++t) {
    for (int j = 0; j < n; ++j) {
      if (t == 0) {
        pred[j] = hmm.initial[j];
      } else {
        pred[j] = 0.0;
        for (int i = 0; i < n; ++i) pred[j] += prev[i] * hmm.a(i, j);
      }
    }
    const double shift = shift_row(&logs[t * n], pred.data(), n, b.data());
    if (!std::isfinite(shift)) impossible(t);
    double c = 0.0;
    for (int j = 0; j < n; ++j) {
      cur[j] = pred[j] * b[j];
      c += cur[j];
    }
    if (!(c > 0.0) || !std::isfinite(c)) impossible(t);
    for (int j = 0; j < n; ++j) prev[j] = cur[j] / c;
    loglik += std::log(c) + shift;
  }
  return loglik;
}

BaumWelchResult baum_welch_fit(std::span<const FeatureMatrix> sequences, int num_states,
                               int mixture_total, Topology topology, const gmm::EmConfig &cfg) {
  cfg.validate();
  BaumWelchResult res;
  res.model = init_hmm(sequences, num_states, mixture_total, topology, cfg.seed,
                       cfg.variance_floor_factor);
  const FeatureMatrix all = pooled(sequences);
  const std::vector<double> floor = gmm::variance_floor(all, cfg.variance_floor_factor);
  const double total_frames = static_cast<double>(all.rows());
  const int n = num_states;

  SequenceStats stats = total_stats(res.model, sequences);
  res.trace.push_back(stats.loglik);

  for (int it = 1; it <= cfg.max_iters; ++it) {
    HmmParams next = res.model;
    std::vector<int> frozen;

    double pi_sum = 0.0;
    for (double v : stats.initial) pi_sum += v;
    for (int i = 0; i < n; ++i) next.initial[i] = stats.initial[i] / pi_sum;

    for (int i = 0; i < n; ++i) {
      double row = 0.0;
      for (int j = 0; j < n; ++j)
        if (transition_allowed(topology, i, j)) row += stats.xi[i * n + j];
      if (!(row > 0.0)) continue;
      for (int j = 0; j < n; ++j)
        next.transitions[i * n + j] =
            transition_allowed(topology, i, j) ? stats.xi[i * n + j] / row : 0.0;
    }

    for (int j = 0; j < n; ++j) {
      if (stats.emission[j].total_weight < kStarvedOccupancy * total_frames) {
        frozen.push_back(j);
        continue;
      }
      next.emissions[j] = kernels::reestimate(stats.emission[j], floor, res.model.emissions[j]);
    }

    SequenceStats next_stats = total_stats(next, sequences);
    res.model = std::move(next);
    stats = std::move(next_stats);
    res.trace.push_back(stats.loglik);
    res.frozen_states.push_back(std::move(frozen));
    const double prev = res.trace[it - 1];
    const double gain = (stats.loglik - prev) / std::max(std::abs(prev), 1e-300);
    if (gain < cfg.rel_tol) break;
  }
  return res;
}

}  // namespace residual_id::hmm
