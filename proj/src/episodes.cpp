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

#include "fsfg/episodes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>

#include "fsfg/kernels.hpp"

namespace fsfg {

Dataset::Dataset(MappingDims dims, std::vector<BilinearFeature> features,
                 std::vector<Label> labels, DatasetRole role)
    : dims_(dims), features_(std::move(features)), labels_(std::move(labels)), role_(role) {
  if (features_.size() != labels_.size()) {
    throw std::invalid_argument("dataset has " + std::to_string(features_.size()) +
                                " features but " + std::to_string(labels_.size()) + " labels");
  }
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].n_a() != dims.n_a || features_[i].n_b() != dims.n_b) {
      throw ShapeError("dataset item " + std::to_string(i) + " has shape " +
                       features_[i].shape_string());
    }
    index_[labels_[i]].push_back(i);
  }
  for (const auto& [label, items] : index_) categories_.push_back(label);
}

const std::vector<std::size_t>& Dataset::items_of(Label category) const {
  const auto it = index_.find(category);
  if (it == index_.end()) {
    throw std::out_of_range("category " + std::to_string(category) + " not in dataset");
  }
  return it->second;
}

std::size_t Dataset::min_items_per_category() const {
  std::size_t m = std::numeric_limits<std::size_t>::max();
  for (const auto& [label, items] : index_) m = std::min(m, items.size());
  return index_.empty() ? 0 : m;
}

Dataset normalized(const Dataset& data, Normalization n) {
  if (n == Normalization::kNone) return data;
  std::vector<BilinearFeature> out;
  out.reserve(data.size());
  for (const auto& f : data.features()) out.push_back(apply_normalization(f, n));
  return Dataset(data.dims(), std::move(out), data.labels(), data.role());
}

void check_disjoint(const Dataset& auxiliary, const Dataset& novel) {
  for (Label c : novel.categories()) {
    if (std::binary_search(auxiliary.categories().begin(), auxiliary.categories().end(), c)) {
      throw std::invalid_argument("category " + std::to_string(c) +
                                  " appears in both the auxiliary and the novel split");
    }
  }
}

namespace {

void check_capacity(const Dataset& data, std::size_t categories, std::size_t per_category) {
  if (data.categories().size() < categories) {
    throw std::invalid_argument("dataset has " + std::to_string(data.categories().size()) +
                                " categories, episode needs " + std::to_string(categories));
  }
  if (data.min_items_per_category() < per_category) {
    throw std::invalid_argument("a category holds only " +
                                std::to_string(data.min_items_per_category()) +
                                " items, episode needs " + std::to_string(per_category) +
                                " (exemplars + queries) per category");
  }
}

void split_category(const Dataset& data, Label category, std::size_t n_e, std::size_t n_q,
                    Rng& rng, Episode& ep) {
  const auto& items = data.items_of(category);
  const auto picks = rng.sample_without_replacement(items.size(), n_e + n_q);
  std::vector<std::size_t> ex, qs;
  for (std::size_t i = 0; i < picks.size(); ++i) {
    (i < n_e ? ex : qs).push_back(items[picks[i]]);
  }
  ep.categories.push_back(category);
  ep.exemplars.push_back(std::move(ex));
  ep.queries.push_back(std::move(qs));
}

}  // namespace

Episode sample_episode(const Dataset& data, std::size_t c_e, std::size_t n_e, std::size_t n_q,
                       Rng& rng) {
  if (c_e == 0 || n_e == 0) throw std::invalid_argument("episode needs c_e >= 1 and n_e >= 1");
  check_capacity(data, c_e, n_e + n_q);
  Episode ep;
  const auto chosen = rng.sample_without_replacement(data.categories().size(), c_e);
  for (std::size_t idx : chosen) split_category(data, data.categories()[idx], n_e, n_q, rng, ep);
  return ep;
}

Episode sample_trial(const Dataset& data, std::size_t n_e, std::size_t n_q, Rng& rng) {
  if (n_e == 0) throw std::invalid_argument("trial needs n_e >= 1");
  check_capacity(data, data.categories().size(), n_e + n_q);
  Episode ep;
  for (Label c : data.categories()) split_category(data, c, n_e, n_q, rng, ep);
  return ep;
}

std::vector<CategoryRepresentation> exemplar_representations(const Dataset& data,
                                                             const Episode& episode) {
  std::vector<CategoryRepresentation> reps;
  reps.reserve(episode.categories.size());
  std::vector<BilinearFeature> group;
  for (std::size_t k = 0; k < episode.categories.size(); ++k) {
    group.clear();
    for (std::size_t i : episode.exemplars[k]) group.push_back(data.features()[i]);
    reps.push_back(category_mean(group, episode.categories[k]));
  }
  return reps;
}

std::vector<LabeledQuery> episode_queries(const Dataset& data, const Episode& episode) {
  std::vector<LabeledQuery> out;
  for (std::size_t k = 0; k < episode.categories.size(); ++k) {
    for (std::size_t i : episode.queries[k]) {
      out.push_back({data.features()[i], episode.categories[k]});
    }
  }
  return out;
}

TrainResult train(const Dataset& auxiliary, MappingModel model, const TrainConfig& cfg, Rng rng,
                  const std::function<void(const EpisodeLog&)>& on_episode) {
  if (auxiliary.role() != DatasetRole::kAuxiliary) {
    throw std::invalid_argument("training requires the auxiliary split");
  }
  Sgd opt(cfg.sgd);
  TrainResult result{std::move(model), {}, false};
  if (cfg.episodes > 0) check_capacity(auxiliary, cfg.c_e, cfg.n_e + cfg.n_q);
  for (std::size_t e = 0; e < cfg.episodes; ++e) {
    const Episode ep = sample_episode(auxiliary, cfg.c_e, cfg.n_e, cfg.n_q, rng);
    const auto reps = exemplar_representations(auxiliary, ep);
    const auto queries = episode_queries(auxiliary, ep);
    EpisodeTape tape;
    const LossReport report = tape.forward(result.model, reps, queries);
    if (!std::isfinite(report.loss)) {
      throw NumericalError("non-finite episode loss at episode " + std::to_string(e));
    }
    const GradientSet grads = tape.backward();
    if (!grads.all_finite()) {
      throw NumericalError("non-finite gradient at episode " + std::to_string(e));
    }
    opt.step(result.model, grads);
    const EpisodeLog entry{e, report.loss, report.accuracy};
    result.log.push_back(entry);
    if (on_episode) on_episode(entry);

    if (cfg.early_stop && cfg.early_stop->validation && cfg.early_stop->every > 0 &&
        (e + 1) % cfg.early_stop->every == 0) {
      const EarlyStop& es = *cfg.early_stop;
      const TrialResult val = evaluate(*es.validation, result.model,
                                       {es.n_e, cfg.n_q, es.trials}, rng.split(e));
      if (val.mean >= es.target_accuracy) {
        result.stopped_early = true;
        break;
      }
    }
  }
  return result;
}

TrialResult TrialResult::from(std::vector<double> accuracies) {
  TrialResult r;
  r.accuracies = std::move(accuracies);
  const double n = static_cast<double>(r.accuracies.size());
  if (r.accuracies.empty()) return r;
  double s = 0.0;
  for (double a : r.accuracies) s += a;
  r.mean = s / n;
  if (r.accuracies.size() > 1) {
    double ss = 0.0;
    for (double a : r.accuracies) ss += (a - r.mean) * (a - r.mean);
    r.std = std::sqrt(ss / (n - 1.0));
  }
  return r;
}

namespace {

void check_eval(const Dataset& novel, const EvalConfig& cfg) {
  if (novel.role() != DatasetRole::kNovel) {
    throw std::invalid_argument("evaluation requires the novel split");
  }
  if (cfg.trials == 0) throw std::invalid_argument("evaluation needs at least one trial");
  check_capacity(novel, novel.categories().size(), cfg.n_e + cfg.n_q);
}

// Runs `trial_accuracy(i, trial_rng)` for every trial. Trials are
// independent and keyed by index, so the parallel loop is deterministic.
template <typename TrialFn>
TrialResult run_trials(std::size_t trials, const Rng& rng, TrialFn&& trial_accuracy) {
  std::vector<double> acc(trials, 0.0);
  const auto n = static_cast<std::int64_t>(trials);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    Rng trial_rng = rng.split(static_cast<std::uint64_t>(i));
    acc[static_cast<std::size_t>(i)] = trial_accuracy(trial_rng);
  }
  return TrialResult::from(std::move(acc));
}

Matrix stack_features(const Dataset& data, const Episode& ep) {
  std::size_t count = 0;
  for (const auto& q : ep.queries) count += q.size();
  Matrix m(count, data.dims().feature_dim());
  std::size_t row = 0;
  for (const auto& qs : ep.queries) {
    for (std::size_t i : qs) {
      const auto f = data.features()[i].data();
      std::copy(f.begin(), f.end(), m.row(row++).begin());
    }
  }
  return m;
}

double accuracy_from_scores(std::span<const double> scores, std::size_t categories,
                            const Episode& ep) {
  std::size_t row = 0, correct = 0;
  for (std::size_t k = 0; k < ep.categories.size(); ++k) {
    for (std::size_t j = 0; j < ep.queries[k].size(); ++j, ++row) {
      if (argmax(scores.subspan(row * categories, categories)) == k) ++correct;
    }
  }
  return row ? double(correct) / double(row) : 0.0;
}

}  // namespace

TrialResult evaluate(const Dataset& novel, const MappingModel& model, const EvalConfig& cfg,
                     const Rng& rng) {
  check_eval(novel, cfg);
  return run_trials(cfg.trials, rng, [&](Rng& trial_rng) {
    const Episode ep = sample_trial(novel, cfg.n_e, cfg.n_q, trial_rng);
    const ClassifierBank bank = generate_bank(model, exemplar_representations(novel, ep));
    const Matrix queries = stack_features(novel, ep);
    std::vector<double> scores(queries.rows() * bank.size());
    kernels::serial::score(queries, bank.classifiers, scores);
    return accuracy_from_scores(scores, bank.size(), ep);
  });
}

namespace {

Matrix knn_prototypes(const Dataset& novel, const Episode& ep) {
  const auto reps = exemplar_representations(novel, ep);
  Matrix protos(reps.size(), novel.dims().feature_dim());
  for (std::size_t k = 0; k < reps.size(); ++k) {
    const auto unit = l2_normalize(reps[k].representation.data());
    std::copy(unit.begin(), unit.end(), protos.row(k).begin());
  }
  return protos;
}

Matrix knn_queries(const Dataset& novel, const Episode& ep) {
  Matrix queries = stack_features(novel, ep);
  for (std::size_t r = 0; r < queries.rows(); ++r) {
    const auto unit = l2_normalize(queries.row(r));
    std::copy(unit.begin(), unit.end(), queries.row(r).begin());
  }
  return queries;
}

}  // namespace

std::vector<Label> knn_predict(const Dataset& novel, const Episode& trial) {
  const Matrix protos = knn_prototypes(novel, trial);
  const Matrix queries = knn_queries(novel, trial);
  std::vector<double> scores(queries.rows() * protos.rows());
  kernels::serial::score(queries, protos, scores);
  std::vector<Label> out;
  for (std::size_t r = 0; r < queries.rows(); ++r) {
    out.push_back(trial.categories[argmax(std::span<const double>(scores).subspan(
        r * protos.rows(), protos.rows()))]);
  }
  return out;
}

TrialResult knn_baseline(const Dataset& novel, const EvalConfig& cfg, const Rng& rng) {
  check_eval(novel, cfg);
  return run_trials(cfg.trials, rng, [&](Rng& trial_rng) {
    const Episode ep = sample_trial(novel, cfg.n_e, cfg.n_q, trial_rng);
    const Matrix protos = knn_prototypes(novel, ep);
    const Matrix queries = knn_queries(novel, ep);
    std::vector<double> scores(queries.rows() * protos.rows());
    kernels::serial::score(queries, protos, scores);
    return accuracy_from_scores(scores, protos.rows(), ep);
  });
}

double incomplete_beta(double a, double b, double x) {
  if (x < 0.0 || x > 1.0) throw std::domain_error("incomplete_beta: x outside [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  // The continued fraction converges fast for x < (a + 1) / (a + b + 2);
  // otherwise use the symmetry I_x(a, b) = 1 - I_{1-x}(b, a).
  const bool flip = x > (a + 1.0) / (a + b + 2.0);
  if (flip) std::swap(a, b), x = 1.0 - x;

  // Modified Lentz evaluation.
  constexpr double tiny = 1e-300;
  constexpr double tol = 1e-15;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double f = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    f *= d * c;
    num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    f *= delta;
    if (std::abs(delta - 1.0) < tol) break;
  }
  const double front = std::exp(log_front) / a;
  return flip ? 1.0 - front * f : front * f;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw std::domain_error("student t: degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  return std::clamp(incomplete_beta(df / 2.0, 0.5, df / (df + t * t)), 0.0, 1.0);
}

TTestReport paired_ttest(const TrialResult& a, const TrialResult& b) {
  const std::size_t n = a.accuracies.size();
  if (n != b.accuracies.size()) {
    throw std::invalid_argument("paired t-test needs equal trial counts (" + std::to_string(n) +
                                " vs " + std::to_string(b.accuracies.size()) + ")");
  }
  if (n < 2) throw std::invalid_argument("paired t-test needs at least two trials");
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a.accuracies[i] - b.accuracies[i];
  mean /= double(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a.accuracies[i] - b.accuracies[i] - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / double(n - 1));
  TTestReport r;
  r.df = n - 1;
  if (sd == 0.0) {
    if (mean == 0.0) return r;
    r.t = std::copysign(std::numeric_limits<double>::infinity(), mean);
    r.p_value = 0.0;
    r.significant = true;
    return r;
  }
  r.t = mean / (sd / std::sqrt(double(n)));
  r.p_value = student_t_two_sided_p(r.t, double(r.df));
  r.significant = r.p_value < kSignificanceLevel;
  return r;
}

ExperimentResult run_experiment(const Dataset& auxiliary, const Dataset& novel,
                                const ExperimentConfig& cfg,
                                const std::function<void(const EpisodeLog&)>& on_episode) {
  const Dataset aux = normalized(auxiliary, cfg.normalization);
  const Dataset nov = normalized(novel, cfg.normalization);
  const Rng root(cfg.seed);
  MappingModel model = init_model(cfg.kind, aux.dims(), cfg.shape, root.split(streams::kInit));
  TrainConfig tc;
  tc.episodes = cfg.episodes;
  tc.c_e = cfg.c_e;
  tc.n_e = cfg.n_e;
  tc.n_q = cfg.n_q;
  tc.sgd = cfg.sgd;
  TrainResult trained = train(aux, std::move(model), tc, root.split(streams::kEpisodes), on_episode);
  TrialResult eval = evaluate(nov, trained.model, {cfg.n_e, cfg.n_q, cfg.trials},
                              root.split(streams::kEval));
  return {std::move(trained), std::move(eval)};
}

std::vector<DepthRow> depth_ablation(const Dataset& auxiliary, const Dataset& novel,
                                     const ExperimentConfig& base, std::size_t first,
                                     std::size_t last) {
  if (first == 0 || first > last) {
    throw std::invalid_argument("depth range must satisfy 1 <= first <= last");
  }
  std::vector<DepthRow> rows;
  for (std::size_t layers = first; layers <= last; ++layers) {
    ExperimentConfig cfg = base;
    cfg.shape.layers = layers;
    ExperimentResult r = run_experiment(auxiliary, novel, cfg);
    rows.push_back({layers, parameter_count(cfg.kind, auxiliary.dims(), cfg.shape),
                    std::move(r.evaluation)});
  }
  return rows;
}

MappingComparison compare_mappings(const Dataset& auxiliary, const Dataset& novel,
                                   const ExperimentConfig& base) {
  MappingComparison out;
  ExperimentConfig pw = base;
  pw.kind = MappingKind::kPiecewise;
  out.piecewise_parameters = parameter_count(pw.kind, auxiliary.dims(), pw.shape);

  ExperimentConfig gl = base;
  gl.kind = MappingKind::kGlobal;
  if (gl.shape.layers >= 2) {
    gl.shape.hidden = matched_global_hidden(auxiliary.dims(), gl.shape.layers,
                                            out.piecewise_parameters);
  }
  out.global_hidden = gl.shape.layers >= 2 ? gl.shape.hidden : 0;
  out.global_parameters = parameter_count(gl.kind, auxiliary.dims(), gl.shape);

  out.piecewise = run_experiment(auxiliary, novel, pw).evaluation;
  out.global = run_experiment(auxiliary, novel, gl).evaluation;
  out.ttest = paired_ttest(out.piecewise, out.global);
  return out;
}

}  // namespace fsfg
