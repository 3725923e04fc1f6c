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

#include "fsfg/bilinear.hpp"

#include <cmath>
#include <utility>

#include "fsfg/kernels.hpp"

namespace fsfg {

FeatureMap::FeatureMap(Matrix values) : values_(std::move(values)) {
  if (values_.cols() == 0) throw ShapeError("feature map needs at least one location");
}

BilinearFeature::BilinearFeature(std::size_t n_a, std::size_t n_b)
    : n_a_(n_a), n_b_(n_b), data_(n_a * n_b, 0.0f) {}

BilinearFeature::BilinearFeature(std::size_t n_a, std::size_t n_b, std::vector<float> data)
    : n_a_(n_a), n_b_(n_b), data_(std::move(data)) {
  if (data_.size() != n_a * n_b) {
    throw ShapeError("bilinear feature of length " + std::to_string(data_.size()) +
                     " does not match (n_a=" + std::to_string(n_a) +
                     ", n_b=" + std::to_string(n_b) + ")");
  }
}

std::span<const float> BilinearFeature::sub_vector(std::size_t t) const {
  if (t >= n_b_) throw std::out_of_range("sub_vector index " + std::to_string(t));
  return std::span<const float>(data_).subspan(t * n_a_, n_a_);
}

std::span<float> BilinearFeature::sub_vector(std::size_t t) {
  if (t >= n_b_) throw std::out_of_range("sub_vector index " + std::to_string(t));
  return std::span<float>(data_).subspan(t * n_a_, n_a_);
}

std::string BilinearFeature::shape_string() const {
  return "(n_a=" + std::to_string(n_a_) + ", n_b=" + std::to_string(n_b_) + ")";
}

std::string to_string(Normalization n) {
  return n == Normalization::kNone ? "none" : "sqrt-l2";
}

Normalization parse_normalization(const std::string& s) {
  if (s == "none") return Normalization::kNone;
  if (s == "sqrt-l2") return Normalization::kSqrtL2;
  throw std::invalid_argument("unknown normalization '" + s + "' (expected none|sqrt-l2)");
}

namespace {

void check_pool_shapes(const FeatureMap& fa, const FeatureMap& fb) {
  if (fa.locations() != fb.locations()) {
    throw ShapeError("pool: location mismatch " + to_string(fa.values().shape()) + " vs " +
                     to_string(fb.values().shape()));
  }
}

}  // namespace

BilinearFeature pool(const FeatureMap& fa, const FeatureMap& fb) {
  check_pool_shapes(fa, fb);
  BilinearFeature x(fa.channels(), fb.channels());
  kernels::parallel::bilinear_pool(fa.values(), fb.values(), x.data());
  return x;
}

BilinearFeature pool_serial(const FeatureMap& fa, const FeatureMap& fb) {
  check_pool_shapes(fa, fb);
  BilinearFeature x(fa.channels(), fb.channels());
  kernels::serial::bilinear_pool(fa.values(), fb.values(), x.data());
  return x;
}

BilinearFeature signed_sqrt_l2(const BilinearFeature& x) {
  std::vector<float> out(x.dim());
  double sq = 0.0;
  for (std::size_t i = 0; i < x.dim(); ++i) {
    const double v = x.data()[i];
    const double r = std::copysign(std::sqrt(std::abs(v)), v);
    out[i] = static_cast<float>(r);
    sq += r * r;
  }
  if (sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (float& v : out) v = static_cast<float>(double(v) * inv);
  }
  return BilinearFeature(x.n_a(), x.n_b(), std::move(out));
}

BilinearFeature apply_normalization(const BilinearFeature& x, Normalization n) {
  return n == Normalization::kSqrtL2 ? signed_sqrt_l2(x) : x;
}

CategoryRepresentation category_mean(std::span<const BilinearFeature> features,
                                     Label category) {
  if (features.empty()) throw DegenerateInput("category_mean: empty exemplar list");
  const BilinearFeature& first = features.front();
  std::vector<double> acc(first.dim(), 0.0);
  for (const auto& f : features) {
    if (!f.same_shape(first)) {
      throw ShapeError("category_mean: mixed shapes " + first.shape_string() + " and " +
                       f.shape_string());
    }
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += f.data()[i];
  }
  std::vector<float> mean(acc.size());
  const double n = static_cast<double>(features.size());
  for (std::size_t i = 0; i < acc.size(); ++i) mean[i] = static_cast<float>(acc[i] / n);
  return {category, BilinearFeature(first.n_a(), first.n_b(), std::move(mean)), features.size()};
}

}  // namespace fsfg
