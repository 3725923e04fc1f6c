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
#include <span>
#include <vector>

#include "fsfg/bilinear.hpp"
#include "fsfg/mapping.hpp"
#include "fsfg/rng.hpp"

namespace fsfg {

struct LabeledQuery {
  BilinearFeature feature;
  Label label = 0;
};

/// Mean negative log-likelihood over an episode's queries.
struct LossReport {
  double loss = 0.0;
  std::vector<double> per_query;
  double accuracy = 0.0;
};

/// One gradient per parameter tensor, in `MappingModel::parameter_tensors` order.
struct GradientSet {
  std::vector<std::vector<double>> tensors;

  static GradientSet zeros_like(const MappingModel& model);
  bool congruent_with(const MappingModel& model) const;
  bool all_finite() const;
};

struct SgdConfig {
  double learning_rate = 0.1;
  double momentum = 0.0;

  void validate() const;
};

/// Forward pass over an episode that keeps every intermediate needed by
/// `backward`. The model passed to `forward` must outlive the tape.
///
/// Classifiers are generated from the exemplar representations, every query
/// is scored by dot products against them, and the loss is the mean
/// negative log-likelihood of the stable softmax. Representations and
/// queries are constants; gradients flow only into model parameters.
class EpisodeTape {
 public:
  LossReport forward(const MappingModel& model, std::span<const CategoryRepresentation> reps,
                     std::span<const LabeledQuery> queries);

  /// Exact gradient of the last forward loss. Throws std::logic_error when
  /// no forward pass has been recorded.
  GradientSet backward() const;

  bool has_forward() const { return model_ != nullptr; }

  /// Pre-activations of every ELU in the last forward pass, flattened in a
  /// fixed order. Used by the finite-difference kink guard.
  std::vector<double> elu_preactivations() const;

  const std::vector<double>& classifiers() const { return classifiers_; }

 private:
  struct BankTrace {
    // z[l] and a[l] for each layer; a[-1] is the input slice.
    std::vector<double> input;
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;
  };

  const MappingModel* model_ = nullptr;
  std::size_t categories_ = 0;
  std::vector<BankTrace> traces_;     // category-major, then bank
  std::vector<double> classifiers_;   // categories x D
  std::vector<float> queries_;        // queries x D
  std::vector<double> probabilities_; // queries x categories
  std::vector<std::size_t> targets_;
};

LossReport episode_loss(const MappingModel& model, std::span<const CategoryRepresentation> reps,
                        std::span<const LabeledQuery> queries);

/// Loss of fixed classifiers on a query set (no mapping involved).
LossReport episode_loss(const ClassifierBank& bank, std::span<const LabeledQuery> queries);

/// Forward then backward in one call.
GradientSet backward(const MappingModel& model, std::span<const CategoryRepresentation> reps,
                     std::span<const LabeledQuery> queries);

/// Plain SGD with an optional heavy-ball momentum buffer.
class Sgd {
 public:
  explicit Sgd(SgdConfig cfg);

  const SgdConfig& config() const { return cfg_; }
  void step(MappingModel& model, const GradientSet& grads);

 private:
  SgdConfig cfg_;
  GradientSet velocity_;
};

/// One update from a fresh optimizer state.
MappingModel sgd_step(MappingModel model, const GradientSet& grads, const SgdConfig& cfg);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t rejected = 0;  // coordinates skipped by the ELU kink guard
};

/// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
inline constexpr double kGradCheckFloor = 1e-6;

/// Central differences on a random subsample of at least `min_coords`
/// parameters (all of them when the model is smaller), compared against
/// `backward`. Coordinates that move an ELU pre-activation lying within
/// 10 * epsilon of zero are rejected and replaced.
GradCheckReport grad_check(const MappingModel& model,
                           std::span<const CategoryRepresentation> reps,
                           std::span<const LabeledQuery> queries, double epsilon, Rng rng,
                           std::size_t min_coords = 200);

}  // namespace fsfg
