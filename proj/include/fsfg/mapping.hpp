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
#include <span>
#include <string>
#include <vector>

#include "fsfg/bilinear.hpp"
#include "fsfg/rng.hpp"
#include "fsfg/tensor.hpp"

namespace fsfg {

/// Affine layer y = W x + b; W is out x in.
struct DenseLayer {
  Matrix weight;
  std::vector<float> bias;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
};

/// Depth and width of one mapping network. A single layer is a pure affine
/// map; deeper networks put ELU after every non-final layer.
struct MlpShape {
  std::size_t layers = 3;
  std::size_t hidden = 1024;
};

/// Layer dimensions of an MLP: input -> h -> ... -> h -> output.
std::vector<std::pair<std::size_t, std::size_t>> layer_dims(std::size_t input_dim,
                                                            std::size_t output_dim,
                                                            MlpShape shape);

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  std::size_t input_dim() const { return layers_.front().in_dim(); }
  std::size_t output_dim() const { return layers_.back().out_dim(); }
  std::size_t depth() const { return layers_.size(); }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  std::vector<double> forward(std::span<const double> x) const;

 private:
  std::vector<DenseLayer> layers_;
};

enum class MappingKind : std::uint32_t { kPiecewise = 0, kGlobal = 1 };

std::string to_string(MappingKind k);
MappingKind parse_mapping_kind(const std::string& s);

struct MappingDims {
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  std::size_t feature_dim() const { return n_a * n_b; }
};

/// Exemplar-to-classifier mapping. Piecewise models hold n_b independent
/// banks, bank t mapping sub-vector t (length n_a) to sub-classifier t.
/// Global models hold one network mapping the whole D-vector.
class MappingModel {
 public:
  MappingModel(MappingKind kind, MappingDims dims, MlpShape shape, std::vector<Mlp> banks);

  MappingKind kind() const { return kind_; }
  const MappingDims& dims() const { return dims_; }
  const MlpShape& shape() const { return shape_; }

  std::size_t bank_count() const { return banks_.size(); }
  const Mlp& bank(std::size_t t) const { return banks_.at(t); }
  Mlp& bank(std::size_t t) { return banks_.at(t); }

  /// Offset and length of bank t's input (and output) slice within a D-vector.
  std::size_t bank_offset(std::size_t t) const;
  std::size_t bank_width() const;

  /// Every weight matrix and bias vector, in checkpoint declaration order:
  /// bank-major, then layer, weight before bias.
  std::vector<std::span<float>> parameter_tensors();
  std::vector<std::span<const float>> parameter_tensors() const;

  friend bool operator==(const MappingModel& a, const MappingModel& b);

 private:
  MappingKind kind_;
  MappingDims dims_;
  MlpShape shape_;
  std::vector<Mlp> banks_;
};

/// Uniform Glorot init in [-s, s], s = sqrt(6 / (fan_in + fan_out)); zero biases.
MappingModel init_model(MappingKind kind, MappingDims dims, MlpShape shape, Rng rng);

/// Model with every weight and bias zero.
MappingModel zero_model(MappingKind kind, MappingDims dims, MlpShape shape);

/// Closed-form parameter count; allocates nothing.
std::uint64_t parameter_count(MappingKind kind, MappingDims dims, MlpShape shape);
std::uint64_t parameter_count(const MappingModel& model);

/// Smallest-error hidden width for a global model whose parameter count
/// matches `budget` at the given depth (depth >= 2).
std::size_t matched_global_hidden(MappingDims dims, std::size_t layers, std::uint64_t budget);

/// Generated classifiers, one row per category in episode order.
struct ClassifierBank {
  std::vector<Label> categories;
  Matrix classifiers;  // categories.size() x D

  std::size_t size() const { return categories.size(); }
  bool empty() const { return categories.empty(); }
};

/// Full-precision classifier F_k (kept in double for the loss path).
std::vector<double> generate_classifier_exact(const MappingModel& model,
                                              const BilinearFeature& rep);
std::vector<float> generate_classifier(const MappingModel& model,
                                       const CategoryRepresentation& rep);
ClassifierBank generate_bank(const MappingModel& model,
                             std::span<const CategoryRepresentation> reps);

void save_model(const MappingModel& model, const std::filesystem::path& path);
MappingModel load_model(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_model(const MappingModel& model);
MappingModel decode_model(std::span<const std::uint8_t> bytes);

}  // namespace fsfg
