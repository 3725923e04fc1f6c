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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "fsfg/bilinear.hpp"
#include "fsfg/mapping.hpp"
#include "fsfg/rng.hpp"
#include "fsfg/train.hpp"

namespace fsfg {

enum class DatasetRole { kAuxiliary, kNovel };

/// Labeled bilinear features of one split. Labels keep their file values;
/// `categories()` is the dense index (sorted label order).
class Dataset {
 public:
  Dataset(MappingDims dims, std::vector<BilinearFeature> features, std::vector<Label> labels,
          DatasetRole role);

  const MappingDims& dims() const { return dims_; }
  DatasetRole role() const { return role_; }
  std::size_t size() const { return features_.size(); }

  const std::vector<BilinearFeature>& features() const { return features_; }
  const std::vector<Label>& labels() const { return labels_; }
  const std::vector<Label>& categories() const { return categories_; }
  const std::vector<std::size_t>& items_of(Label category) const;

  std::size_t min_items_per_category() const;

 private:
  MappingDims dims_;
  std::vector<BilinearFeature> features_;
  std::vector<Label> labels_;
  DatasetRole role_;
  std::vector<Label> categories_;
  std::map<Label, std::vector<std::size_t>> index_;
};

/// The same dataset with `n` applied to every feature.
Dataset normalized(const Dataset& data, Normalization n);

/// Throws std::invalid_argument if the two splits share a category.
void check_disjoint(const Dataset& auxiliary, const Dataset& novel);

/// Sampled categories with per-category exemplar and query item indices.
struct Episode {
  std::vector<Label> categories;
  std::vector<std::vector<std::size_t>> exemplars;
  std::vector<std::vector<std::size_t>> queries;
};

/// Uniform without-replacement sampling of c_e categories, then n_e
/// exemplars and n_q disjoint queries inside each.
Episode sample_episode(const Dataset& data, std::size_t c_e, std::size_t n_e, std::size_t n_q,
                       Rng& rng);

/// Exemplar/query split over every category of `data`, in category order.
Episode sample_trial(const Dataset& data, std::size_t n_e, std::size_t n_q, Rng& rng);

std::vector<CategoryRepresentation> exemplar_representations(const Dataset& data,
                                                             const Episode& episode);
std::vector<LabeledQuery> episode_queries(const Dataset& data, const Episode& episode);

struct EpisodeLog {
  std::size_t episode = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct EarlyStop {
  const Dataset* validation = nullptr;
  std::size_t every = 100;
  std::size_t n_e = 1;
  std::size_t trials = 5;
  double target_accuracy = 1.0;
};

struct TrainConfig {
  std::size_t episodes = 0;
  std::size_t c_e = 5;
  std::size_t n_e = 1;
  std::size_t n_q = 20;
  SgdConfig sgd;
  std::optional<EarlyStop> early_stop;
};

struct TrainResult {
  MappingModel model;
  std::vector<EpisodeLog> log;
  bool stopped_early = false;
};

/// Episodic training: sample, average exemplars, generate classifiers, score
/// queries, backpropagate, update. `on_episode` sees every log entry.
/// Throws NumericalError on a non-finite loss.
TrainResult train(const Dataset& auxiliary, MappingModel model, const TrainConfig& cfg, Rng rng,
                  const std::function<void(const EpisodeLog&)>& on_episode = {});

/// Per-trial accuracies with their mean and sample standard deviation.
struct TrialResult {
  std::vector<double> accuracies;
  double mean = 0.0;
  double std = 0.0;

  static TrialResult from(std::vector<double> accuracies);
};

struct EvalConfig {
  std::size_t n_e = 1;
  std::size_t n_q = 20;
  std::size_t trials = 20;
};

/// Classifies the queries of trial `i` (split drawn from rng.split(i)) with
/// classifiers generated by `model`. Every novel category is in every trial.
TrialResult evaluate(const Dataset& novel, const MappingModel& model, const EvalConfig& cfg,
                     const Rng& rng);

/// Cosine nearest-prototype classifier on the same trial splits as
/// `evaluate`: exemplars are averaged, then l2-normalized.
TrialResult knn_baseline(const Dataset& novel, const EvalConfig& cfg, const Rng& rng);

/// Label predicted by the cosine nearest-prototype rule for one trial; used
/// directly by tests.
std::vector<Label> knn_predict(const Dataset& novel, const Episode& trial);

struct TTestReport {
  double t = 0.0;
  std::size_t df = 0;
  double p_value = 1.0;
  bool significant = false;
};

inline constexpr double kSignificanceLevel = 0.05;

/// Two-sided paired Student t-test on per-trial differences a - b.
TTestReport paired_ttest(const TrialResult& a, const TrialResult& b);

/// Two-sided tail probability P(|T| >= |t|) for Student's t with df degrees.
double student_t_two_sided_p(double t, double df);
/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t c_e = 5;
  std::size_t n_e = 1;
  std::size_t n_q = 20;
  std::size_t episodes = 1000;
  std::size_t trials = 20;
  MappingKind kind = MappingKind::kPiecewise;
  MlpShape shape;
  SgdConfig sgd;
  Normalization normalization = Normalization::kNone;
};

struct ExperimentResult {
  TrainResult training;
  TrialResult evaluation;
};

/// init (stream "init") -> train (stream "episodes") -> evaluate (stream "eval"),
/// all keyed off cfg.seed. Features are normalized per cfg.normalization first.
ExperimentResult run_experiment(const Dataset& auxiliary, const Dataset& novel,
                                const ExperimentConfig& cfg,
                                const std::function<void(const EpisodeLog&)>& on_episode = {});

struct DepthRow {
  std::size_t layers = 0;
  std::uint64_t parameters = 0;
  TrialResult result;
};

/// One train+evaluate run per depth in [first, last], same seed and data.
std::vector<DepthRow> depth_ablation(const Dataset& auxiliary, const Dataset& novel,
                                     const ExperimentConfig& base, std::size_t first,
                                     std::size_t last);

struct MappingComparison {
  std::uint64_t piecewise_parameters = 0;
  std::uint64_t global_parameters = 0;
  std::size_t global_hidden = 0;
  TrialResult piecewise;
  TrialResult global;
  TTestReport ttest;  // piecewise - global
};

/// Piecewise vs a parameter-matched global mapping on identical episodes and
/// identical evaluation splits. At depth 1 the global model is the plain
/// D x D affine map (no width to match).
MappingComparison compare_mappings(const Dataset& auxiliary, const Dataset& novel,
                                   const ExperimentConfig& base);

}  // namespace fsfg
