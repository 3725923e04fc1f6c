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
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fsfg/bilinear.hpp"
#include "fsfg/episodes.hpp"
#include "fsfg/mapping.hpp"
#include "fsfg/rng.hpp"

namespace fsfg {

// ---------------------------------------------------------------------------
// Feature files
//
//   "FSFG1" | version u32 | n_a u32 | n_b u32 | count u32 |
//   count x (label u32 | n_a * n_b f32 in sub-vector order)
//
// All integers and floats little-endian.

inline constexpr std::uint32_t kFeatureFileVersion = 1;

std::vector<std::uint8_t> encode_features(const Dataset& data);
Dataset decode_features(std::span<const std::uint8_t> bytes, DatasetRole role);

void save_features(const Dataset& data, const std::filesystem::path& path);
Dataset load_features(const std::filesystem::path& path, DatasetRole role);

/// Dense index -> file label, when the file's labels are not exactly 0..C-1.
std::optional<std::vector<Label>> label_remapping(const Dataset& data);

// ---------------------------------------------------------------------------
// Feature-map files (input of `fsfg pool`)
//
//   "FSFM1" | version u32 | n_a u32 | n_b u32 | locations u32 | count u32 |
//   count x (label u32 | n_a * L f32 | n_b * L f32), maps row-major.

struct FeatureMapItem {
  Label label = 0;
  FeatureMap stream_a;
  FeatureMap stream_b;
};

void save_feature_maps(std::span<const FeatureMapItem> items, const std::filesystem::path& path);
std::vector<FeatureMapItem> load_feature_maps(const std::filesystem::path& path);

/// Pools every item; optionally applies the post-pooling transform.
Dataset pool_feature_maps(std::span<const FeatureMapItem> items, Normalization n,
                          DatasetRole role);

// ---------------------------------------------------------------------------
// Synthetic data with a planted direction per (category, sub-vector).

struct SyntheticSpec {
  std::size_t categories = 20;
  std::size_t items_per_category = 40;
  std::size_t n_a = 8;
  std::size_t n_b = 8;
  double noise = 0.3;
  std::uint64_t seed = 0;
  /// Categories assigned to the novel split (default: a quarter, as in a
  /// 150 / 50 auxiliary / novel split).
  std::optional<std::size_t> novel_categories;
  /// Planted directions of two categories at the same sub-vector are at
  /// least this far apart.
  double min_angle_degrees = 30.0;

  std::size_t novel_count() const;
  void validate() const;
};

struct SyntheticData {
  Dataset auxiliary;
  Dataset novel;
  /// Planted unit directions, [category][sub-vector] -> n_a values.
  std::vector<std::vector<std::vector<float>>> means;
};

/// Item sub-vector t = planted unit direction (category, t) + N(0, noise^2)
/// per entry. Auxiliary labels are 0..C_B-1, novel labels C_B..C-1.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// Text outputs. Reals are written in shortest round-trip form.

std::string format_real(double v);
std::string format_real(float v);

/// "episode<TAB>J<TAB>accuracy"
std::string format_log_line(const EpisodeLog& entry);

/// Recorded configuration of a results file header.
struct ResultsHeader {
  std::vector<std::pair<std::string, std::string>> fields;

  void add(std::string key, std::string value) {
    fields.emplace_back(std::move(key), std::move(value));
  }
  std::string line() const;
};

ResultsHeader header_for(const ExperimentConfig& cfg);

/// Header, one "index<TAB>accuracy" line per trial, mean and std lines, then
/// an optional t-test line.
void write_results(std::ostream& out, const ResultsHeader& header, const TrialResult& result,
                   const std::optional<TTestReport>& ttest = std::nullopt);

void write_ttest(std::ostream& out, const TTestReport& t);

/// Header, then one row per depth: layers, parameters, mean, std, trials.
void write_depth_table(std::ostream& out, const ResultsHeader& header,
                       std::span<const DepthRow> rows);

/// Header, a summary row per mapping, paired per-trial accuracies, t-test.
void write_comparison(std::ostream& out, const ResultsHeader& header,
                      const MappingComparison& c, std::size_t piecewise_hidden);

/// Classifier export rows: label, repetition, then the D classifier values.
struct ClassifierRow {
  Label label = 0;
  std::size_t repetition = 0;
  std::vector<float> values;
};

/// Exemplar items of repetition `rep` for category index `k` of `data`.
std::vector<std::size_t> export_draw(const Dataset& data, std::size_t k, std::size_t rep,
                                     std::size_t n_e, const Rng& rng);

std::vector<ClassifierRow> collect_classifiers(const Dataset& data, const MappingModel& model,
                                               std::size_t n_e, std::size_t repetitions,
                                               const Rng& rng);

void write_classifier_rows(std::ostream& out, std::span<const ClassifierRow> rows);
/// Rows of one bank, all tagged with `repetition`.
void write_bank(std::ostream& out, const ClassifierBank& bank, std::size_t repetition);
std::vector<ClassifierRow> read_classifier_rows(std::istream& in);

void export_classifiers(const Dataset& data, const MappingModel& model, std::size_t n_e,
                        std::size_t repetitions, const Rng& rng,
                        const std::filesystem::path& path);

}  // namespace fsfg
