// bench/bench_kernels.cpp

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

// Serial reference kernels against their OpenMP versions.
// Run: bench_kernels [--benchmark_filter=...]; thread count from RESIDUAL_ID_THREADS.

#include <benchmark/benchmark.h>

#include <vector>

#include "residual_id/hmm.hpp"
#include "residual_id/kernels.hpp"
#include "residual_id/parallel.hpp"
#include "residual_id/rng.hpp"

using namespace residual_id;

namespace {

struct Fixture {
  gmm::GmmParams g;
  features::FeatureMatrix x;

  Fixture(int m, std::size_t t) : g(m, 13), x(t, 13) {
    Rng rng(7);
    for (double &v : g.means) v = rng.normal();
    for (double &v : g.variances) v = rng.uniform(0.5, 2.0);
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t k = 0; k < 13; ++k) x(i, k) = rng.normal();
  }
};

void BM_total_loglik_serial(benchmark::State &state) {
  const Fixture f(static_cast<int>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::total_loglik_serial(f.g, f.x));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

void BM_total_loglik_parallel(benchmark::State &state) {
  const Fixture f(static_cast<int>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::total_loglik(f.g, f.x));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

void BM_accumulate_serial(benchmark::State &state) {
  const Fixture f(static_cast<int>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::accumulate_serial(f.g, f.x));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

void BM_accumulate_parallel(benchmark::State &state) {
  const Fixture f(static_cast<int>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::accumulate(f.g, f.x));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

void BM_forward_two_state(benchmark::State &state) {
  const Fixture f(8, static_cast<std::size_t>(state.range(0)));
  hmm::HmmParams h;
  h.num_states = 2;
  h.transitions = {0.9, 0.1, 0.2, 0.8};
  h.initial = {0.5, 0.5};
  h.emissions = {f.g, f.g};
  for (auto _ : state) benchmark::DoNotOptimize(hmm::forward_loglik(h, f.x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void grid(benchmark::internal::Benchmark *b) {
  for (int m : {4, 16, 32})
    for (int t : {300, 3000}) b->Args({m, t});
}

}  // namespace

BENCHMARK(BM_total_loglik_serial)->Apply(grid);
BENCHMARK(BM_total_loglik_parallel)->Apply(grid);
BENCHMARK(BM_accumulate_serial)->Apply(grid);
BENCHMARK(BM_accumulate_parallel)->Apply(grid);
BENCHMARK(BM_forward_two_state)->Arg(300)->Arg(3000);

int main(int argc, char **argv) {
  configure_threads_from_env();
  benchmark::Initialize(&argc, argv);
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
