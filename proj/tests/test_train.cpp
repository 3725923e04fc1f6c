// Copyright 2026 The FSFG Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fsfg/train.hpp"
#include "oracles.hpp"

using namespace fsfg;

namespace {

struct ToyEpisode {
  std::vector<CategoryRepresentation> reps;
  std::vector<LabeledQuery> queries;
};

BilinearFeature random_feature(std::size_t n_a, std::size_t n_b, Rng& rng) {
  BilinearFeature f(n_a, n_b);
  for (float& v : f.data()) v = rng.uniform_float(-1, 1);
  return f;
}

/// Random representations, and queries that are noisy copies of them.
ToyEpisode toy_episode(std::size_t n_a, std::size_t n_b, std::size_t categories,
                       std::size_t per_category, Rng rng, float noise = 0.3f) {
  ToyEpisode ep;
  for (Label c = 0; c < categories; ++c) {
    ep.reps.push_back({c, random_feature(n_a, n_b, rng), 1});
  }
  for (Label c = 0; c < categories; ++c) {
    for (std::size_t q = 0; q < per_category; ++q) {
      BilinearFeature f = ep.reps[c].representation;
      for (float& v : f.data()) v += noise * rng.uniform_float(-1, 1);
      ep.queries.push_back({f, c});
    }
  }
  return ep;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("zero classifiers give J = ln C and accuracy 1/C") {
  const MappingModel m = zero_model(MappingKind::kPiecewise, {3, 2}, {2, 4});
  const ToyEpisode ep = toy_episode(3, 2, 4, 5, Rng(1));
  const LossReport r = episode_loss(m, ep.reps, ep.queries);
  CHECK(r.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(r.accuracy == doctest::Approx(0.25));
}

TEST_CASE("single category episode has zero loss") {
  const MappingModel m = init_model(MappingKind::kGlobal, {3, 2}, {2, 4}, Rng(2));
  const ToyEpisode ep = toy_episode(3, 2, 1, 6, Rng(3));
  const LossReport r = episode_loss(m, ep.reps, ep.queries);
  CHECK(r.loss == 0.0);
  CHECK(r.accuracy == 1.0);
}

TEST_CASE("two categories with logits (1, 0)") {
  ClassifierBank bank{{7, 9}, Matrix(2, 2, {1, 0, 0, 0})};
  const std::vector<LabeledQuery> q{{BilinearFeature(2, 1, {1, 0}), 7}};
  const LossReport r = episode_loss(bank, q);
  const double expect = std::log(1.0 + std::exp(-1.0));
  CHECK(r.loss == doctest::Approx(expect).epsilon(1e-12));
  CHECK(r.loss == doctest::Approx(0.3133).epsilon(1e-4));
  CHECK(r.accuracy == 1.0);
}

TEST_CASE("query label outside the episode is rejected") {
  const MappingModel m = zero_model(MappingKind::kPiecewise, {2, 2}, {1, 0});
  ToyEpisode ep = toy_episode(2, 2, 2, 1, Rng(4));
  ep.queries[0].label = 99;
  CHECK_THROWS_AS(episode_loss(m, ep.reps, ep.queries), std::invalid_argument);
}

TEST_CASE("loss report invariants") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const MappingModel m = init_model(MappingKind::kPiecewise, {4, 3}, {3, 6}, rng.split(trial));
    const ToyEpisode ep = toy_episode(4, 3, 3, 4, rng.split(100 + trial));
    const LossReport r = episode_loss(m, ep.reps, ep.queries);
    REQUIRE(r.per_query.size() == ep.queries.size());
    const double mean =
        std::accumulate(r.per_query.begin(), r.per_query.end(), 0.0) / r.per_query.size();
    CHECK(std::abs(mean - r.loss) <= 1e-9);
    for (double l : r.per_query) CHECK(l >= 0.0);
    CHECK(r.loss >= 0.0);
  }
}

TEST_CASE("backward without a forward pass throws") {
  EpisodeTape tape;
  CHECK_THROWS_AS(tape.backward(), std::logic_error);
}

TEST_CASE("balanced identical logits give zero bank-weight gradient from a zero sub-vector") {
  // One-layer piecewise model; sub-vector 1 of every exemplar is zero.
  const MappingModel m = init_model(MappingKind::kPiecewise, {3, 2}, {1, 0}, Rng(6));
  ToyEpisode ep = toy_episode(3, 2, 3, 2, Rng(7));
  for (auto& r : ep.reps) {
    for (std::size_t i = 0; i < 3; ++i) r.representation.data()[3 + i] = 0.0f;
  }
  const GradientSet g = backward(m, ep.reps, ep.queries);
  // Tensors: bank0 W, bank0 b, bank1 W, bank1 b.
  REQUIRE(g.tensors.size() == 4);
  CHECK(max_abs(g.tensors[2]) == 0.0);
  CHECK(max_abs(g.tensors[0]) > 0.0);
}

TEST_CASE("bank receives no gradient when its slice carries no signal") {
  const MappingModel m = init_model(MappingKind::kPiecewise, {3, 3}, {3, 5}, Rng(8));
  ToyEpisode ep = toy_episode(3, 3, 3, 3, Rng(9));
  // Zero sub-vector 2 in every exemplar and every query.
  for (auto& r : ep.reps) {
    for (std::size_t i = 0; i < 3; ++i) r.representation.data()[6 + i] = 0.0f;
  }
  for (auto& q : ep.queries) {
    for (std::size_t i = 0; i < 3; ++i) q.feature.data()[6 + i] = 0.0f;
  }
  const GradientSet g = backward(m, ep.reps, ep.queries);
  CHECK(g.congruent_with(m));
  CHECK(g.all_finite());
  const std::size_t per_bank = g.tensors.size() / 3;
  for (std::size_t k = 2 * per_bank; k < g.tensors.size(); ++k) CHECK(max_abs(g.tensors[k]) == 0.0);
  double others = 0.0;
  for (std::size_t k = 0; k < 2 * per_bank; ++k) others = std::max(others, max_abs(g.tensors[k]));
  CHECK(others > 0.0);
}

TEST_CASE("grad check: one-layer 2x2 piecewise below 1e-4") {
  const MappingModel m = init_model(MappingKind::kPiecewise, {2, 2}, {1, 0}, Rng(10));
  const ToyEpisode ep = toy_episode(2, 2, 3, 4, Rng(11));
  const GradCheckReport r = grad_check(m, ep.reps, ep.queries, 1e-3, Rng(12));
  CHECK(r.checked == 12);
  CHECK(r.max_relative_error < 1e-4);
}

TEST_CASE("grad check: three layers with ELU below 1e-3") {
  for (auto kind : {MappingKind::kPiecewise, MappingKind::kGlobal}) {
    const MappingModel m = init_model(kind, {4, 3}, {3, 8}, Rng(13));
    const ToyEpisode ep = toy_episode(4, 3, 4, 3, Rng(14));
    const GradCheckReport r = grad_check(m, ep.reps, ep.queries, 1e-3, Rng(15));
    CHECK(r.checked >= 200);
    CHECK(r.max_relative_error < 1e-3);
  }
}

TEST_CASE("sgd: zero gradient is a fixed point") {
  const MappingModel m = init_model(MappingKind::kPiecewise, {3, 2}, {2, 4}, Rng(16));
  CHECK(sgd_step(m, GradientSet::zeros_like(m), {0.1, 0.0}) == m);
  CHECK(sgd_step(m, GradientSet::zeros_like(m), {0.1, 0.9}) == m);
}

TEST_CASE("sgd: lr 1 with g = theta zeroes the model") {
  MappingModel m = init_model(MappingKind::kGlobal, {2, 2}, {2, 3}, Rng(17));
  for (auto t : m.parameter_tensors()) {
    for (float& v : t) v += 0.25f;
  }
  GradientSet g = GradientSet::zeros_like(m);
  const auto params = m.parameter_tensors();
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k].size(); ++i) g.tensors[k][i] = params[k][i];
  }
  CHECK(sgd_step(m, g, {1.0, 0.0}) == zero_model(MappingKind::kGlobal, {2, 2}, {2, 3}));
}

TEST_CASE("sgd: momentum accumulates a heavy-ball buffer") {
  const MappingModel m = zero_model(MappingKind::kPiecewise, {1, 1}, {1, 0});
  GradientSet g = GradientSet::zeros_like(m);
  g.tensors[0][0] = 1.0;
  Sgd opt({0.5, 0.5});
  MappingModel x = m;
  opt.step(x, g);
  CHECK(x.parameter_tensors()[0][0] == -0.5f);
  opt.step(x, g);
  CHECK(x.parameter_tensors()[0][0] == -1.25f);
}

TEST_CASE("sgd: invalid configs and incongruent gradients") {
  CHECK_THROWS(SgdConfig{0.0, 0.0}.validate());
  CHECK_THROWS(SgdConfig{0.1, 1.0}.validate());
  const MappingModel m = zero_model(MappingKind::kPiecewise, {2, 2}, {1, 0});
  const MappingModel other = zero_model(MappingKind::kPiecewise, {3, 2}, {1, 0});
  CHECK_THROWS_AS(sgd_step(m, GradientSet::zeros_like(other), {}), ShapeError);
}

TEST_CASE("one small step along the negative gradient lowers the loss") {
  const MappingModel m = init_model(MappingKind::kPiecewise, {4, 2}, {3, 8}, Rng(18));
  const ToyEpisode ep = toy_episode(4, 2, 3, 4, Rng(19));
  const double before = episode_loss(m, ep.reps, ep.queries).loss;
  const MappingModel next = sgd_step(m, backward(m, ep.reps, ep.queries), {1e-2, 0.0});
  CHECK(episode_loss(next, ep.reps, ep.queries).loss < before);
}

TEST_CASE("50 steps at lr 0.01 strictly decrease J on a separable two-class episode") {
  MappingModel m = init_model(MappingKind::kPiecewise, {2, 2}, {1, 0}, Rng(20));
  const ToyEpisode ep = toy_episode(2, 2, 2, 5, Rng(21), 0.1f);
  double prev = episode_loss(m, ep.reps, ep.queries).loss;
  for (int step = 0; step < 50; ++step) {
    m = sgd_step(m, backward(m, ep.reps, ep.queries), {0.01, 0.0});
    const double now = episode_loss(m, ep.reps, ep.queries).loss;
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("one-layer global mapping: J never increases over 100 steps at lr 1e-3") {
  MappingModel m = init_model(MappingKind::kGlobal, {3, 2}, {1, 0}, Rng(22));
  const ToyEpisode ep = toy_episode(3, 2, 3, 4, Rng(23));
  double prev = episode_loss(m, ep.reps, ep.queries).loss;
  for (int step = 0; step < 100; ++step) {
    m = sgd_step(m, backward(m, ep.reps, ep.queries), {1e-3, 0.0});
    const double now = episode_loss(m, ep.reps, ep.queries).loss;
    CHECK(now <= prev);
    prev = now;
  }
}

TEST_CASE("backward and sgd are bit-reproducible") {
  auto run = [] {
    MappingModel m = init_model(MappingKind::kPiecewise, {4, 4}, {3, 8}, Rng(24));
    const ToyEpisode ep = toy_episode(4, 4, 5, 3, Rng(25));
    Sgd opt({0.1, 0.5});
    for (int i = 0; i < 10; ++i) opt.step(m, backward(m, ep.reps, ep.queries));
    return m;
  };
  CHECK(run() == run());
}

}  // TEST_SUITE("train")
