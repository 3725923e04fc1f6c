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

#include "fsfg/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <cstdint>
#include <utility>

#include "binary_io.hpp"
#include "fsfg/kernels.hpp"

namespace fsfg {

std::vector<std::pair<std::size_t, std::size_t>> layer_dims(std::size_t input_dim,
                                                            std::size_t output_dim,
                                                            MlpShape shape) {
  if (shape.layers == 0) throw std::invalid_argument("an MLP needs at least one layer");
  if (shape.layers > 1 && shape.hidden == 0) {
    throw std::invalid_argument("hidden width must be positive for multi-layer MLPs");
  }
  std::vector<std::pair<std::size_t, std::size_t>> dims;
  std::size_t in = input_dim;
  for (std::size_t l = 0; l < shape.layers; ++l) {
    const std::size_t out = (l + 1 == shape.layers) ? output_dim : shape.hidden;
    dims.emplace_back(in, out);
    in = out;
  }
  return dims;
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("an MLP needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].bias.size() != layers_[l].out_dim()) {
      throw ShapeError("layer " + std::to_string(l) + " bias length " +
                       std::to_string(layers_[l].bias.size()) + " vs weight " +
                       to_string(layers_[l].weight.shape()));
    }
    if (l > 0 && layers_[l].in_dim() != layers_[l - 1].out_dim()) {
      throw ShapeError("layer " + std::to_string(l) + " weight " +
                       to_string(layers_[l].weight.shape()) + " does not follow " +
                       to_string(layers_[l - 1].weight.shape()));
    }
  }
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  if (x.size() != input_dim()) {
    throw ShapeError("mlp input length " + std::to_string(x.size()) + " vs weight " +
                     to_string(layers_.front().weight.shape()));
  }
  std::vector<double> a(x.begin(), x.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    std::vector<double> z(layers_[l].out_dim());
    kernels::serial::affine(layers_[l].weight, layers_[l].bias, a, z);
    if (l + 1 < layers_.size()) elu_inplace(z);
    a = std::move(z);
  }
  return a;
}

std::string to_string(MappingKind k) {
  return k == MappingKind::kPiecewise ? "piecewise" : "global";
}

MappingKind parse_mapping_kind(const std::string& s) {
  if (s == "piecewise") return MappingKind::kPiecewise;
  if (s == "global") return MappingKind::kGlobal;
  throw std::invalid_argument("unknown mapping kind '" + s + "' (expected piecewise|global)");
}

MappingModel::MappingModel(MappingKind kind, MappingDims dims, MlpShape shape,
                           std::vector<Mlp> banks)
    : kind_(kind), dims_(dims), shape_(shape), banks_(std::move(banks)) {
  const std::size_t expected = kind == MappingKind::kPiecewise ? dims.n_b : 1;
  if (banks_.size() != expected) {
    throw ShapeError(to_string(kind) + " model needs " + std::to_string(expected) +
                     " banks, got " + std::to_string(banks_.size()));
  }
  for (const Mlp& b : banks_) {
    if (b.input_dim() != bank_width() || b.output_dim() != bank_width() ||
        b.depth() != shape.layers) {
      throw ShapeError("bank shape does not match " + to_string(kind) + " model with n_a=" +
                       std::to_string(dims.n_a) + ", n_b=" + std::to_string(dims.n_b));
    }
  }
}

std::size_t MappingModel::bank_width() const {
  return kind_ == MappingKind::kPiecewise ? dims_.n_a : dims_.feature_dim();
}

std::size_t MappingModel::bank_offset(std::size_t t) const { return t * bank_width(); }

std::vector<std::span<float>> MappingModel::parameter_tensors() {
  std::vector<std::span<float>> out;
  for (Mlp& b : banks_) {
    for (DenseLayer& l : b.layers()) {
      out.push_back(l.weight.values());
      out.emplace_back(l.bias);
    }
  }
  return out;
}

std::vector<std::span<const float>> MappingModel::parameter_tensors() const {
  std::vector<std::span<const float>> out;
  for (const Mlp& b : banks_) {
    for (const DenseLayer& l : b.layers()) {
      out.push_back(l.weight.values());
      out.emplace_back(l.bias);
    }
  }
  return out;
}

bool operator==(const MappingModel& a, const MappingModel& b) {
  if (a.kind_ != b.kind_ || a.dims_.n_a != b.dims_.n_a || a.dims_.n_b != b.dims_.n_b ||
      a.shape_.layers != b.shape_.layers || a.shape_.hidden != b.shape_.hidden) {
    return false;
  }
  const auto pa = a.parameter_tensors();
  const auto pb = b.parameter_tensors();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (std::memcmp(pa[i].data(), pb[i].data(), pa[i].size_bytes()) != 0) return false;
  }
  return true;
}

namespace {

void check_dims(MappingDims dims) {
  if (dims.n_a == 0 || dims.n_b == 0) {
    throw std::invalid_argument("mapping dims must be positive (n_a=" +
                                std::to_string(dims.n_a) + ", n_b=" +
                                std::to_string(dims.n_b) + ")");
  }
}

template <typename MakeLayer>
MappingModel build_model(MappingKind kind, MappingDims dims, MlpShape shape,
                         MakeLayer&& make_layer) {
  check_dims(dims);
  const std::size_t banks = kind == MappingKind::kPiecewise ? dims.n_b : 1;
  const std::size_t width = kind == MappingKind::kPiecewise ? dims.n_a : dims.feature_dim();
  const auto dimlist = layer_dims(width, width, shape);
  std::vector<Mlp> mlps;
  mlps.reserve(banks);
  for (std::size_t t = 0; t < banks; ++t) {
    std::vector<DenseLayer> layers;
    for (auto [in, out] : dimlist) layers.push_back(make_layer(in, out));
    mlps.emplace_back(std::move(layers));
  }
  return MappingModel(kind, dims, shape, std::move(mlps));
}

}  // namespace

MappingModel init_model(MappingKind kind, MappingDims dims, MlpShape shape, Rng rng) {
  return build_model(kind, dims, shape, [&rng](std::size_t in, std::size_t out) {
    const auto s = static_cast<float>(std::sqrt(6.0 / double(in + out)));
    DenseLayer layer{Matrix(out, in), std::vector<float>(out, 0.0f)};
    for (float& w : layer.weight.values()) w = rng.uniform_float(-s, s);
    return layer;
  });
}

MappingModel zero_model(MappingKind kind, MappingDims dims, MlpShape shape) {
  return build_model(kind, dims, shape, [](std::size_t in, std::size_t out) {
    return DenseLayer{Matrix(out, in), std::vector<float>(out, 0.0f)};
  });
}

std::uint64_t parameter_count(MappingKind kind, MappingDims dims, MlpShape shape) {
  const std::uint64_t width = kind == MappingKind::kPiecewise ? dims.n_a : dims.feature_dim();
  const std::uint64_t banks = kind == MappingKind::kPiecewise ? dims.n_b : 1;
  const std::uint64_t h = shape.hidden;
  std::uint64_t per_bank = 0;
  if (shape.layers == 1) {
    per_bank = width * width + width;
  } else {
    per_bank = (width * h + h) + (shape.layers - 2) * (h * h + h) + (h * width + width);
  }
  return banks * per_bank;
}

std::uint64_t parameter_count(const MappingModel& model) {
  return parameter_count(model.kind(), model.dims(), model.shape());
}

std::size_t matched_global_hidden(MappingDims dims, std::size_t layers, std::uint64_t budget) {
  if (layers < 2) throw std::invalid_argument("hidden width is only defined for depth >= 2");
  std::size_t best = 1;
  std::uint64_t best_err = UINT64_MAX;
  for (std::size_t h = 1;; ++h) {
    const std::uint64_t n = parameter_count(MappingKind::kGlobal, dims, {layers, h});
    const std::uint64_t err = n > budget ? n - budget : budget - n;
    if (err < best_err) {
      best_err = err;
      best = h;
    }
    if (n > budget) break;
  }
  return best;
}

std::vector<double> generate_classifier_exact(const MappingModel& model,
                                              const BilinearFeature& rep) {
  const MappingDims& d = model.dims();
  if (rep.n_a() != d.n_a || rep.n_b() != d.n_b) {
    throw ShapeError("representation " + rep.shape_string() + " does not match model (n_a=" +
                     std::to_string(d.n_a) + ", n_b=" + std::to_string(d.n_b) + ")");
  }
  std::vector<double> out(d.feature_dim());
  const std::size_t width = model.bank_width();
  const auto banks = static_cast<std::int64_t>(model.bank_count());
  // Banks read and write disjoint slices.
#pragma omp parallel for schedule(static) if (banks > 1 && width * banks > 4096)
  for (std::int64_t t = 0; t < banks; ++t) {
    const std::size_t off = model.bank_offset(static_cast<std::size_t>(t));
    std::vector<double> x(rep.data().begin() + off, rep.data().begin() + off + width);
    const std::vector<double> y = model.bank(static_cast<std::size_t>(t)).forward(x);
    std::copy(y.begin(), y.end(), out.begin() + off);
  }
  return out;
}

std::vector<float> generate_classifier(const MappingModel& model,
                                       const CategoryRepresentation& rep) {
  const std::vector<double> exact = generate_classifier_exact(model, rep.representation);
  return {exact.begin(), exact.end()};
}

ClassifierBank generate_bank(const MappingModel& model,
                             std::span<const CategoryRepresentation> reps) {
  ClassifierBank bank;
  bank.classifiers = Matrix(reps.size(), model.dims().feature_dim());
  for (std::size_t k = 0; k < reps.size(); ++k) {
    if (!reps[k].representation.same_shape(reps.front().representation)) {
      throw ShapeError("generate_bank: mixed representation shapes " +
                       reps.front().representation.shape_string() + " and " +
                       reps[k].representation.shape_string());
    }
    const std::vector<float> f = generate_classifier(model, reps[k]);
    std::copy(f.begin(), f.end(), bank.classifiers.row(k).begin());
    bank.categories.push_back(reps[k].category);
  }
  return bank;
}

// Checkpoint: "FSFGM1", kind u32, n_a u32, n_b u32, layers u32, hidden u32,
// then every parameter tensor as little-endian f32 in declaration order.
namespace {
constexpr std::string_view kModelMagic = "FSFGM1";
}

std::vector<std::uint8_t> encode_model(const MappingModel& model) {
  detail::ByteWriter w;
  w.magic(kModelMagic);
  w.u32(static_cast<std::uint32_t>(model.kind()));
  w.u32(static_cast<std::uint32_t>(model.dims().n_a));
  w.u32(static_cast<std::uint32_t>(model.dims().n_b));
  w.u32(static_cast<std::uint32_t>(model.shape().layers));
  w.u32(static_cast<std::uint32_t>(model.shape().hidden));
  for (auto t : model.parameter_tensors()) w.f32s(t);
  return std::move(w.bytes());
}

MappingModel decode_model(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic(kModelMagic);
  const std::uint32_t kind_tag = r.u32("kind tag");
  if (kind_tag > 1) {
    throw FormatError("unknown mapping kind tag " + std::to_string(kind_tag) +
                      " at byte offset " + std::to_string(r.offset() - 4));
  }
  MappingDims dims;
  dims.n_a = r.u32("n_a");
  dims.n_b = r.u32("n_b");
  MlpShape shape;
  shape.layers = r.u32("layer count");
  shape.hidden = r.u32("hidden width");
  if (dims.n_a == 0 || dims.n_b == 0 || shape.layers == 0) {
    throw FormatError("degenerate checkpoint header ending at byte offset " +
                      std::to_string(r.offset()));
  }
  const auto kind = static_cast<MappingKind>(kind_tag);
  const std::uint64_t count = parameter_count(kind, dims, shape);
  r.need(count * 4, "parameter payload");
  MappingModel model = zero_model(kind, dims, shape);
  for (auto t : model.parameter_tensors()) r.f32s(t, "parameter payload");
  if (r.remaining() != 0) {
    throw FormatError("trailing bytes after parameters at byte offset " +
                      std::to_string(r.offset()));
  }
  return model;
}

void save_model(const MappingModel& model, const std::filesystem::path& path) {
  detail::write_file(path, encode_model(model));
}

MappingModel load_model(const std::filesystem::path& path) {
  return decode_model(detail::read_file(path));
}

}  // namespace fsfg
