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

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "doctest.h"
#include "fsfg/episodes.hpp"
#include "fsfg/io.hpp"
#include "oracles.hpp"

#ifdef FSFG_HAVE_BOOST_MATH
#include <boost/math/distributions/students_t.hpp>
#endif

using namespace fsfg;

namespace {

/// `categories` labels starting at `first`, `items` random features each.
Dataset random_dataset(std::size_t categories, std::size_t items, std::size_t n_a,
                       std::size_t n_b, Rng rng, Label first = 0,
                       DatasetRole role = DatasetRole::kNovel) {
  std::vector<BilinearFeature> fs;
  std::vector<Label> ls;
  for (std::size_t c = 0; c < categories; ++c) {
    for (std::size_t i = 0; i < items; ++i) {
      BilinearFeature f(n_a, n_b);
      for (float& v : f.data()) v = rng.uniform_float(-1, 1);
      fs.push_back(std::move(f));
      ls.push_back(first + Label(c));
    }
  }
  return Dataset({n_a, n_b}, std::move(fs), std::move(ls), role);
}

SyntheticSpec small_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.categories = 12;
  s.items_per_category = 30;
  s.n_a = 4;
  s.n_b = 4;
  s.noise = 0.3;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_SUITE("episodes") {

TEST_CASE("exactly c_e categories of n_e + n_q items are partitioned") {
  const Dataset d = random_dataset(3, 5, 2, 2, Rng(1));
  Rng rng(2);
  const Episode ep = sample_episode(d, 3, 2, 3, rng);
  REQUIRE(ep.categories.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    std::set<std::size_t> all(ep.exemplars[k].begin(), ep.exemplars[k].end());
    all.insert(ep.queries[k].begin(), ep.queries[k].end());
    const auto& items = d.items_of(ep.categories[k]);
    CHECK(all == std::set<std::size_t>(items.begin(), items.end()));
  }
}

TEST_CASE("same rng state gives the same episode") {
  const Dataset d = random_dataset(6, 10, 2, 2, Rng(3));
  Rng a(4), b(4);
  const Episode x = sample_episode(d, 3, 2, 4, a);
  const Episode y = sample_episode(d, 3, 2, 4, b);
  CHECK(x.categories == y.categories);
  CHECK(x.exemplars == y.exemplars);
  CHECK(x.queries == y.queries);
}

TEST_CASE("insufficient categories or items are reported") {
  const Dataset d = random_dataset(3, 4, 2, 2, Rng(5));
  Rng rng(6);
  CHECK_THROWS_AS(sample_episode(d, 4, 1, 1, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_episode(d, 2, 2, 3, rng), std::invalid_argument);
}

TEST_CASE("category pairs are drawn uniformly") {
  const Dataset d = random_dataset(4, 2, 1, 1, Rng(7));
  Rng rng(8);
  const int n = 10000;
  std::map<std::pair<Label, Label>, int> counts;
  for (int i = 0; i < n; ++i) {
    auto c = sample_episode(d, 2, 1, 1, rng).categories;
    std::sort(c.begin(), c.end());
    ++counts[{c[0], c[1]}];
  }
  CHECK(counts.size() == 6);
  const double p = 1.0 / 6.0, sigma = std::sqrt(n * p * (1 - p));
  for (const auto& [pair, c] : counts) CHECK(std::abs(c - n * p) < 3 * sigma);
}

TEST_CASE("episodes keep exemplars and queries disjoint with exact sizes") {
  const Dataset d = random_dataset(8, 9, 1, 1, Rng(9));
  Rng rng(10);
  for (int i = 0; i < 2000; ++i) {
    const Episode ep = sample_episode(d, 5, 3, 4, rng);
    REQUIRE(ep.categories.size() == 5);
    CHECK(std::set<Label>(ep.categories.begin(), ep.categories.end()).size() == 5);
    for (std::size_t k = 0; k < 5; ++k) {
      REQUIRE(ep.exemplars[k].size() == 3);
      REQUIRE(ep.queries[k].size() == 4);
      std::set<std::size_t> s(ep.exemplars[k].begin(), ep.exemplars[k].end());
      s.insert(ep.queries[k].begin(), ep.queries[k].end());
      REQUIRE(s.size() == 7);
      for (auto item : s) REQUIRE(d.labels()[item] == ep.categories[k]);
    }
  }
}

TEST_CASE("disjointness check between splits") {
  const Dataset a = random_dataset(3, 2, 1, 1, Rng(1), 0, DatasetRole::kAuxiliary);
  const Dataset b = random_dataset(3, 2, 1, 1, Rng(2), 3);
  const Dataset c = random_dataset(3, 2, 1, 1, Rng(2), 2);
  CHECK_NOTHROW(check_disjoint(a, b));
  CHECK_THROWS_AS(check_disjoint(a, c), std::invalid_argument);
}

TEST_CASE("train: zero episodes return the model unchanged") {
  const Dataset d = random_dataset(5, 6, 2, 2, Rng(11), 0, DatasetRole::kAuxiliary);
  const MappingModel m = init_model(MappingKind::kPiecewise, {2, 2}, {2, 4}, Rng(12));
  TrainConfig cfg;
  cfg.episodes = 0;
  cfg.n_q = 3;
  const TrainResult r = train(d, m, cfg, Rng(13));
  CHECK(r.model == m);
  CHECK(r.log.empty());
}

TEST_CASE("train: equal seeds give identical logs and models") {
  const SyntheticData data = generate_synthetic(small_spec(3));
  const MappingModel m = init_model(MappingKind::kPiecewise, {4, 4}, {3, 16}, Rng(14));
  TrainConfig cfg;
  cfg.episodes = 50;
  cfg.c_e = 4;
  cfg.n_q = 5;
  const TrainResult a = train(data.auxiliary, m, cfg, Rng(15));
  const TrainResult b = train(data.auxiliary, m, cfg, Rng(15));
  REQUIRE(a.log.size() == 50);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].loss == b.log[i].loss);
    CHECK(a.log[i].accuracy == b.log[i].accuracy);
  }
  CHECK(a.model == b.model);
}

TEST_CASE("train rejects the novel split") {
  const Dataset d = random_dataset(5, 6, 2, 2, Rng(11), 0, DatasetRole::kNovel);
  TrainConfig cfg;
  cfg.episodes = 1;
  cfg.n_q = 3;
  CHECK_THROWS(train(d, zero_model(MappingKind::kPiecewise, {2, 2}, {1, 0}), cfg, Rng(1)));
}

TEST_CASE("train: synthetic separable data reaches high training accuracy") {
  SyntheticSpec spec;
  spec.seed = 1;
  const SyntheticData data = generate_synthetic(spec);
  ExperimentConfig cfg;
  cfg.seed = 1;
  cfg.episodes = 2000;
  cfg.shape = {3, 32};
  const MappingModel init = init_model(cfg.kind, {8, 8}, cfg.shape, Rng(cfg.seed).split(streams::kInit));
  TrainConfig tc;
  tc.episodes = cfg.episodes;
  const TrainResult r = train(data.auxiliary, init, tc, Rng(cfg.seed).split(streams::kEpisodes));
  // Average of the last 100 episodes smooths single-episode noise.
  double acc = 0.0;
  for (std::size_t i = r.log.size() - 100; i < r.log.size(); ++i) acc += r.log[i].accuracy;
  CHECK(acc / 100.0 >= 0.9);
}

TEST_CASE("early stop halts once validation accuracy reaches the target") {
  const SyntheticData data = generate_synthetic(small_spec(4));
  const MappingModel m = init_model(MappingKind::kPiecewise, {4, 4}, {2, 16}, Rng(1));
  TrainConfig cfg;
  cfg.episodes = 500;
  cfg.c_e = 4;
  cfg.n_q = 5;
  cfg.early_stop = EarlyStop{&data.novel, 10, 1, 3, 0.0};
  const TrainResult r = train(data.auxiliary, m, cfg, Rng(2));
  CHECK(r.stopped_early);
  CHECK(r.log.size() == 10);
}

TEST_CASE("evaluate: a single novel category is always right") {
  const Dataset d = random_dataset(1, 25, 2, 2, Rng(16));
  const MappingModel m = init_model(MappingKind::kPiecewise, {2, 2}, {2, 4}, Rng(17));
  const TrialResult r = evaluate(d, m, {}, Rng(18));
  CHECK(r.accuracies.size() == 20);
  CHECK(r.mean == 1.0);
  CHECK(r.std == 0.0);
}

TEST_CASE("evaluate: untrained model on pure noise is at chance") {
  SyntheticSpec spec = small_spec(5);
  spec.noise = 100.0;
  spec.categories = 20;
  const SyntheticData data = generate_synthetic(spec);
  const MappingModel m = init_model(MappingKind::kPiecewise, {4, 4}, {3, 16}, Rng(19));
  const TrialResult r = evaluate(data.novel, m, {1, 5, 20}, Rng(20));
  const double c = double(data.novel.categories().size());
  const double n = 20.0 * c * 5.0;
  CHECK(std::abs(r.mean - 1.0 / c) <= 3.0 * std::sqrt((1.0 / c) * (1 - 1.0 / c) / n));
}

TEST_CASE("evaluate: constant classifiers give exactly 1/C with first-index ties") {
  const Dataset d = random_dataset(4, 25, 2, 2, Rng(21));
  const TrialResult r =
      evaluate(d, zero_model(MappingKind::kGlobal, {2, 2}, {2, 3}), {}, Rng(22));
  CHECK(r.mean == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("evaluate: insufficient items per category is an error") {
  const Dataset d = random_dataset(3, 20, 2, 2, Rng(23));
  CHECK_THROWS(evaluate(d, zero_model(MappingKind::kPiecewise, {2, 2}, {1, 0}), {1, 20, 2},
                        Rng(1)));
}

TEST_CASE("trial results recompute their summary") {
  Rng rng(24);
  std::vector<double> acc(20);
  for (double& a : acc) a = rng.uniform();
  const TrialResult r = TrialResult::from(acc);
  const double mean = std::accumulate(acc.begin(), acc.end(), 0.0) / 20.0;
  double ss = 0.0;
  for (double a : acc) ss += (a - mean) * (a - mean);
  CHECK(std::abs(r.mean - mean) < 1e-9);
  CHECK(std::abs(r.std - std::sqrt(ss / 19.0)) < 1e-9);
}

TEST_CASE("evaluate and knn draw identical trial splits") {
  const Dataset d = random_dataset(4, 30, 2, 2, Rng(25));
  const Rng rng(26);
  for (std::size_t i = 0; i < 5; ++i) {
    Rng a = rng.split(i), b = rng.split(i);
    const Episode x = sample_trial(d, 1, 20, a), y = sample_trial(d, 1, 20, b);
    CHECK(x.exemplars == y.exemplars);
    CHECK(x.queries == y.queries);
  }
}

TEST_CASE("knn: self-match and dominant component") {
  // Two orthogonal categories in a 2x1 feature space.
  std::vector<BilinearFeature> fs;
  std::vector<Label> ls;
  for (int i = 0; i < 2; ++i) {
    fs.emplace_back(2, 1, std::vector<float>{1, 0});
    ls.push_back(0);
    fs.emplace_back(2, 1, std::vector<float>{0, 1});
    ls.push_back(1);
  }
  fs.emplace_back(2, 1, std::vector<float>{1, 0.1f});
  ls.push_back(1);  // label deliberately wrong; the prediction is what matters
  const Dataset d({2, 1}, fs, ls, DatasetRole::kNovel);
  Episode ep;
  ep.categories = {0, 1};
  ep.exemplars = {{0}, {1}};
  ep.queries = {{2}, {3, 4}};
  const auto pred = knn_predict(d, ep);
  CHECK(pred == std::vector<Label>{0, 1, 0});
}

TEST_CASE("knn agrees with the brute-force cosine oracle") {
  for (std::size_t n_e : {1, 5}) {
    const Dataset d = random_dataset(10, 30, 3, 3, Rng(27 + n_e));
    Rng rng(28);
    const Episode ep = sample_trial(d, n_e, 20, rng);
    CHECK(knn_predict(d, ep) == oracle::brute_force_cosine(d, ep));
  }
}

TEST_CASE("knn rejects zero-norm features") {
  const Dataset d({1, 1}, {BilinearFeature(1, 1, {0}), BilinearFeature(1, 1, {1})}, {0, 0},
                  DatasetRole::kNovel);
  Episode ep{{0}, {{0}}, {{1}}};
  CHECK_THROWS_AS(knn_predict(d, ep), DegenerateInput);
}

TEST_CASE("paired t-test: identical and constant differences") {
  const TrialResult a = TrialResult::from({0.5, 0.6, 0.7, 0.4});
  const TTestReport same = paired_ttest(a, a);
  CHECK(same.t == 0.0);
  CHECK(same.p_value == 1.0);
  CHECK(!same.significant);
  CHECK(same.df == 3);

  std::vector<double> x(20), y(20);
  for (int i = 0; i < 20; ++i) {
    x[i] = 0.25 + 0.01 * i;
    y[i] = x[i] - 0.125;  // exactly representable shift
  }
  const TTestReport c = paired_ttest(TrialResult::from(x), TrialResult::from(y));
  CHECK(std::isinf(c.t));
  CHECK(c.significant);
  CHECK(c.p_value == 0.0);
  CHECK_THROWS(paired_ttest(TrialResult::from({0.1}), TrialResult::from({0.2})));
  CHECK_THROWS(paired_ttest(TrialResult::from({0.1, 0.2}), TrialResult::from({0.2, 0.3, 0.4})));
}

TEST_CASE("paired t-test: statistic matches the direct formula") {
  const std::vector<double> diff{0.05, -0.01, 0.03, 0.02, 0.04, -0.02, 0.01, 0.06, 0.00, 0.03};
  std::vector<double> b(diff.size(), 0.5), a(diff.size());
  for (std::size_t i = 0; i < diff.size(); ++i) a[i] = b[i] + diff[i];
  // Direct: mean / (sd / sqrt(n)) on the realized differences.
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= double(a.size());
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += std::pow(a[i] - b[i] - mean, 2);
  const double t = mean / (std::sqrt(ss / double(a.size() - 1)) / std::sqrt(double(a.size())));
  const TTestReport r = paired_ttest(TrialResult::from(a), TrialResult::from(b));
  CHECK(std::abs(r.t - t) < 1e-6);
  CHECK(r.df == 9);
  CHECK(r.p_value >= 0.0);
  CHECK(r.p_value <= 1.0);
}

TEST_CASE("two-sided p-values: closed forms and independent library") {
  // df = 1 is Cauchy: p = 1 - 2 atan(|t|) / pi.
  for (double t : {0.1, 0.5, 1.0, 3.0, 20.0}) {
    CHECK(std::abs(student_t_two_sided_p(t, 1) - (1.0 - 2.0 * std::atan(t) / M_PI)) < 1e-10);
  }
  // df = 2: p = 1 - |t| / sqrt(2 + t^2).
  for (double t : {0.1, 0.5, 1.0, 3.0, 20.0}) {
    CHECK(std::abs(student_t_two_sided_p(t, 2) - (1.0 - t / std::sqrt(2.0 + t * t))) < 1e-10);
  }
  CHECK(student_t_two_sided_p(0.0, 7) == 1.0);
#ifdef FSFG_HAVE_BOOST_MATH
  for (double df : {3.0, 9.0, 19.0, 50.0}) {
    boost::math::students_t dist(df);
    for (double t : {0.01, 0.7, 1.5, 2.1, 4.0, 9.0}) {
      const double expect = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
      CHECK(std::abs(student_t_two_sided_p(t, df) - expect) < 1e-9);
      CHECK(student_t_two_sided_p(-t, df) == student_t_two_sided_p(t, df));
    }
  }
#endif
}

TEST_CASE("depth ablation: singleton range equals a standalone run") {
  const SyntheticData data = generate_synthetic(small_spec(6));
  ExperimentConfig cfg;
  cfg.seed = 7;
  cfg.c_e = 4;
  cfg.n_q = 5;
  cfg.episodes = 40;
  cfg.trials = 20;
  cfg.shape = {3, 16};
  const auto rows = depth_ablation(data.auxiliary, data.novel, cfg, 3, 3);
  REQUIRE(rows.size() == 1);
  const ExperimentResult alone = run_experiment(data.auxiliary, data.novel, cfg);
  CHECK(rows[0].layers == 3);
  CHECK(rows[0].result.accuracies == alone.evaluation.accuracies);
  CHECK(rows[0].parameters == parameter_count(cfg.kind, {4, 4}, cfg.shape));

  const auto full = depth_ablation(data.auxiliary, data.novel, cfg, 1, 4);
  REQUIRE(full.size() == 4);
  for (const auto& r : full) CHECK(r.result.accuracies.size() == 20);
  const auto again = depth_ablation(data.auxiliary, data.novel, cfg, 1, 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(again[i].result.accuracies == full[i].result.accuracies);
  CHECK_THROWS(depth_ablation(data.auxiliary, data.novel, cfg, 3, 2));
}

TEST_CASE("compare_mappings pairs trials and matches budgets") {
  const SyntheticData data = generate_synthetic(small_spec(8));
  ExperimentConfig cfg;
  cfg.seed = 9;
  cfg.c_e = 4;
  cfg.n_q = 5;
  cfg.episodes = 30;
  cfg.trials = 6;
  cfg.shape = {3, 16};
  const MappingComparison c = compare_mappings(data.auxiliary, data.novel, cfg);
  CHECK(c.piecewise.accuracies.size() == 6);
  CHECK(c.global.accuracies.size() == 6);
  CHECK(c.ttest.df == 5);
  CHECK(c.global_parameters == parameter_count(MappingKind::kGlobal, {4, 4}, {3, c.global_hidden}));
  const double rel = std::abs(double(c.global_parameters) - double(c.piecewise_parameters)) /
                     double(c.piecewise_parameters);
  CHECK(rel < 0.1);
}

}  // TEST_SUITE("episodes")
