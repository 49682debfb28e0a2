// tests/test_kernels.cpp

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

#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "residual_id/kernels.hpp"
#include "residual_id/parallel.hpp"

using namespace residual_id;
using namespace residual_id::kernels;

namespace {

struct ThreadGuard {
  int saved = max_threads();
  ~ThreadGuard() { set_threads(saved); }
};

}  // namespace

TEST_CASE("frame_loglik parallel equals serial and the naive oracle") {
  Rng rng(1);
  const auto g = oracle::random_gmm(rng, 8, 13);
  const auto x = oracle::random_features(rng, 1000, 13);
  std::vector<double> par(x.rows()), ser(x.rows());
  frame_loglik(g, x, par);
  frame_loglik_serial(g, x, ser);
  for (std::size_t t = 0; t < x.rows(); ++t) {
    CHECK(par[t] == ser[t]);
    CHECK(oracle::relative_diff(par[t], static_cast<double>(oracle::naive_logpdf(g, x.row(t)))) < 1e-12);
  }
}

TEST_CASE("total_loglik agrees with the serial reference to rounding") {
  Rng rng(2);
  for (std::size_t t : {1u, 255u, 256u, 257u, 3000u}) {
    const auto g = oracle::random_gmm(rng, 4, 6);
    const auto x = oracle::random_features(rng, t, 6);
    CHECK(oracle::relative_diff(total_loglik(g, x), total_loglik_serial(g, x)) < 1e-12);
  }
}

TEST_CASE("parallel kernels are bit-identical across thread counts") {
  ThreadGuard guard;
  Rng rng(3);
  const auto g = oracle::random_gmm(rng, 16, 13);
  const auto x = oracle::random_features(rng, 2000, 13);
  std::vector<double> w(x.rows());
  for (double &v : w) v = rng.uniform();
  set_threads(1);
  const double ref = total_loglik(g, x);
  const GmmStats s1 = accumulate(g, x, w);
  for (int threads : {2, 3, 4, 8}) {
    set_threads(threads);
    CHECK(total_loglik(g, x) == ref);
    const GmmStats s = accumulate(g, x, w);
    CHECK(s.loglik == s1.loglik);
    CHECK(s.occupancy == s1.occupancy);
    CHECK(s.first == s1.first);
    CHECK(s.second == s1.second);
  }
}

TEST_CASE("accumulate matches the serial reference") {
  Rng rng(4);
  const auto g = oracle::random_gmm(rng, 5, 4);
  const auto x = oracle::random_features(rng, 777, 4);
  std::vector<double> w(x.rows());
  for (double &v : w) v = rng.uniform();
  for (bool weighted : {false, true}) {
    const GmmStats a = weighted ? accumulate(g, x, w) : accumulate(g, x);
    const GmmStats b = weighted ? accumulate_serial(g, x, w) : accumulate_serial(g, x);
    CHECK(oracle::relative_diff(a.loglik, b.loglik) < 1e-12);
    CHECK(oracle::relative_diff(a.total_weight, b.total_weight) < 1e-12);
    double occ = 0.0;
    for (int i = 0; i < 5; ++i) {
      CHECK(oracle::relative_diff(a.occupancy[i], b.occupancy[i]) < 1e-11);
      occ += a.occupancy[i];
    }
    CHECK(occ == doctest::Approx(a.total_weight).epsilon(1e-12));
    for (std::size_t k = 0; k < a.first.size(); ++k) {
      CHECK(a.first[k] == doctest::Approx(b.first[k]).epsilon(1e-10));
      CHECK(a.second[k] == doctest::Approx(b.second[k]).epsilon(1e-10));
    }
  }
}

TEST_CASE("reestimate keeps starved components") {
  gmm::GmmParams prev(2, 1);
  prev.means = {-1.0, 3.0};
  prev.variances = {0.5, 0.7};
  GmmStats s(2, 1);
  s.total_weight = 4.0;
  s.occupancy = {4.0, 0.0};
  s.first = {8.0, 0.0};
  s.second = {20.0, 0.0};
  const std::vector<double> floor{1e-3};
  const auto g = reestimate(s, floor, prev);
  CHECK(g.weights[0] == 1.0);
  CHECK(g.weights[1] == 0.0);
  CHECK(g.means[0] == doctest::Approx(2.0));
  CHECK(g.variances[0] == doctest::Approx(1.0));
  CHECK(g.means[1] == 3.0);
  CHECK(g.variances[1] == 0.7);
  const GmmCache cache(g);
  const std::vector<double> x{0.0};
  CHECK(cache.component(1, x) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("variance floor applies in the M-step") {
  gmm::GmmParams prev(1, 1);
  GmmStats s(1, 1);
  s.total_weight = 2.0;
  s.occupancy = {2.0};
  s.first = {2.0};
  s.second = {2.0};
  const std::vector<double> floor{0.25};
  CHECK(reestimate(s, floor, prev).variances[0] == 0.25);
}
