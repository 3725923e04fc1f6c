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
#include <span>
#include <string>
#include <vector>

#include "fsfg/tensor.hpp"

namespace fsfg {

using Label = std::uint32_t;

/// One convolutional stream re-organized as channels x locations.
class FeatureMap {
 public:
  FeatureMap() = default;
  explicit FeatureMap(Matrix values);

  std::size_t channels() const { return values_.rows(); }
  std::size_t locations() const { return values_.cols(); }
  const Matrix& values() const { return values_; }

 private:
  Matrix values_;
};

/// Pooled D = n_a * n_b vector laid out as [x^1; ...; x^{n_b}], each x^t of
/// length n_a. Sub-vector t (0-based here) is stream A modulated by channel t
/// of stream B.
class BilinearFeature {
 public:
  BilinearFeature() = default;
  BilinearFeature(std::size_t n_a, std::size_t n_b);
  BilinearFeature(std::size_t n_a, std::size_t n_b, std::vector<float> data);

  std::size_t n_a() const { return n_a_; }
  std::size_t n_b() const { return n_b_; }
  std::size_t dim() const { return data_.size(); }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  std::span<const float> sub_vector(std::size_t t) const;
  std::span<float> sub_vector(std::size_t t);

  bool same_shape(const BilinearFeature& other) const {
    return n_a_ == other.n_a_ && n_b_ == other.n_b_;
  }
  std::string shape_string() const;

  friend bool operator==(const BilinearFeature&, const BilinearFeature&) = default;

 private:
  std::size_t n_a_ = 0;
  std::size_t n_b_ = 0;
  std::vector<float> data_;
};

/// Mean of a category's exemplar features (the input of the mapping network).
struct CategoryRepresentation {
  Label category = 0;
  BilinearFeature representation;
  std::size_t exemplar_count = 0;
};

/// Post-pooling transform applied to every feature of an experiment.
enum class Normalization { kNone, kSqrtL2 };

std::string to_string(Normalization n);
Normalization parse_normalization(const std::string& s);

/// Sum over locations of the per-location outer products fa(:, l) fb(:, l)^T.
BilinearFeature pool(const FeatureMap& fa, const FeatureMap& fb);
/// Serial reference of `pool`, bit-identical to it.
BilinearFeature pool_serial(const FeatureMap& fa, const FeatureMap& fb);

/// Signed square root followed by l2 normalization. A zero feature stays zero.
BilinearFeature signed_sqrt_l2(const BilinearFeature& x);
BilinearFeature apply_normalization(const BilinearFeature& x, Normalization n);

CategoryRepresentation category_mean(std::span<const BilinearFeature> features,
                                     Label category);

}  // namespace fsfg
