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

#include "fsfg/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>

#include "fsfg/kernels.hpp"

namespace fsfg {

GradientSet GradientSet::zeros_like(const MappingModel& model) {
  GradientSet g;
  for (auto t : model.parameter_tensors()) g.tensors.emplace_back(t.size(), 0.0);
  return g;
}

bool GradientSet::congruent_with(const MappingModel& model) const {
  const auto params = model.parameter_tensors();
  if (params.size() != tensors.size()) return false;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != tensors[i].size()) return false;
  }
  return true;
}

bool GradientSet::all_finite() const {
  for (const auto& t : tensors) {
    for (double v : t) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("momentum must lie in [0, 1)");
  }
}

namespace {

std::vector<std::size_t> resolve_targets(std::span<const CategoryRepresentation> reps,
                                         std::span<const LabeledQuery> queries) {
  std::vector<std::size_t> targets;
  targets.reserve(queries.size());
  for (const LabeledQuery& q : queries) {
    const auto it = std::find_if(reps.begin(), reps.end(),
                                 [&](const CategoryRepresentation& r) { return r.category == q.label; });
    if (it == reps.end()) {
      throw std::invalid_argument("query label " + std::to_string(q.label) +
                                  " is not among the episode categories");
    }
    targets.push_back(static_cast<std::size_t>(it - reps.begin()));
  }
  return targets;
}

Matrix stack_queries(std::span<const LabeledQuery> queries, std::size_t dim) {
  Matrix m(queries.size(), dim);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    if (queries[q].feature.dim() != dim) {
      throw ShapeError("query " + std::to_string(q) + " has shape " +
                       queries[q].feature.shape_string() + ", expected dimension " +
                       std::to_string(dim));
    }
    std::copy(queries[q].feature.data().begin(), queries[q].feature.data().end(),
              m.row(q).begin());
  }
  return m;
}

// Scores every query against double-precision classifiers and fills the
// report plus the softmax probabilities.
LossReport score_and_loss(std::span<const double> classifiers, std::size_t categories,
                          const Matrix& queries, std::span<const std::size_t> targets,
                          std::vector<double>* probabilities) {
  const std::size_t nq = queries.rows(), dim = queries.cols();
  LossReport report;
  report.per_query.resize(nq);
  if (probabilities) probabilities->assign(nq * categories, 0.0);
  std::size_t correct = 0;
  std::vector<double> logits(categories);
  for (std::size_t q = 0; q < nq; ++q) {
    const auto x = queries.row(q);
    for (std::size_t c = 0; c < categories; ++c) {
      const double* f = classifiers.data() + c * dim;
      double acc = 0.0;
      for (std::size_t i = 0; i < dim; ++i) acc += f[i] * double(x[i]);
      logits[c] = acc;
    }
    report.per_query[q] = log_sum_exp(logits) - logits[targets[q]];
    if (argmax(logits) == targets[q]) ++correct;
    if (probabilities) {
      const auto p = softmax(logits);
      std::copy(p.begin(), p.end(), probabilities->begin() + q * categories);
    }
  }
  double total = 0.0;
  for (double l : report.per_query) total += l;
  report.loss = nq ? total / double(nq) : 0.0;
  report.accuracy = nq ? double(correct) / double(nq) : 0.0;
  return report;
}

}  // namespace

LossReport EpisodeTape::forward(const MappingModel& model,
                                std::span<const CategoryRepresentation> reps,
                                std::span<const LabeledQuery> queries) {
  model_ = nullptr;
  const std::size_t dim = model.dims().feature_dim();
  const std::size_t banks = model.bank_count();
  const std::size_t width = model.bank_width();
  for (const auto& r : reps) {
    if (r.representation.n_a() != model.dims().n_a || r.representation.n_b() != model.dims().n_b) {
      throw ShapeError("representation " + r.representation.shape_string() +
                       " does not match model (n_a=" + std::to_string(model.dims().n_a) +
                       ", n_b=" + std::to_string(model.dims().n_b) + ")");
    }
  }
  targets_ = resolve_targets(reps, queries);
  const Matrix qm = stack_queries(queries, dim);

  categories_ = reps.size();
  traces_.assign(categories_ * banks, {});
  classifiers_.assign(categories_ * dim, 0.0);
  const auto total = static_cast<std::int64_t>(categories_ * banks);
  // Each (category, bank) cell owns its trace and its classifier slice.
#pragma omp parallel for schedule(static) if (total > 16 && width > 16)
  for (std::int64_t cell = 0; cell < total; ++cell) {
    const std::size_t k = static_cast<std::size_t>(cell) / banks;
    const std::size_t t = static_cast<std::size_t>(cell) % banks;
    const std::size_t off = model.bank_offset(t);
    BankTrace& tr = traces_[cell];
    const auto src = reps[k].representation.data().subspan(off, width);
    tr.input.assign(src.begin(), src.end());
    const auto& layers = model.bank(t).layers();
    std::span<const double> a = tr.input;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      std::vector<double> z(layers[l].out_dim());
      kernels::serial::affine(layers[l].weight, layers[l].bias, a, z);
      std::vector<double> h = z;
      if (l + 1 < layers.size()) elu_inplace(h);
      tr.pre.push_back(std::move(z));
      tr.post.push_back(std::move(h));
      a = tr.post.back();
    }
    std::copy(tr.post.back().begin(), tr.post.back().end(),
              classifiers_.begin() + k * dim + off);
  }

  queries_.assign(qm.values().begin(), qm.values().end());
  LossReport report = score_and_loss(classifiers_, categories_, qm, targets_, &probabilities_);
  model_ = &model;
  return report;
}

std::vector<double> EpisodeTape::elu_preactivations() const {
  std::vector<double> out;
  for (const BankTrace& tr : traces_) {
    for (std::size_t l = 0; l + 1 < tr.pre.size(); ++l) {
      out.insert(out.end(), tr.pre[l].begin(), tr.pre[l].end());
    }
  }
  return out;
}

GradientSet EpisodeTape::backward() const {
  if (!model_) throw std::logic_error("backward called without a recorded forward pass");
  const MappingModel& model = *model_;
  const std::size_t dim = model.dims().feature_dim();
  const std::size_t nq = targets_.size();
  const std::size_t banks = model.bank_count();
  const std::size_t width = model.bank_width();
  const std::size_t depth = model.shape().layers;

  // dJ/dscore(q, c) = (p(q, c) - [c == y_q]) / nq, then dJ/dF_c = sum_q dscore(q, c) x_q.
  std::vector<double> dclassifiers(categories_ * dim, 0.0);
  for (std::size_t q = 0; q < nq; ++q) {
    const float* x = queries_.data() + q * dim;
    for (std::size_t c = 0; c < categories_; ++c) {
      double ds = probabilities_[q * categories_ + c];
      if (c == targets_[q]) ds -= 1.0;
      ds /= double(nq);
      double* g = dclassifiers.data() + c * dim;
      for (std::size_t i = 0; i < dim; ++i) g[i] += ds * double(x[i]);
    }
  }

  GradientSet grads = GradientSet::zeros_like(model);
  const auto nbanks = static_cast<std::int64_t>(banks);
  // Banks own disjoint gradient tensors; categories are reduced in order.
#pragma omp parallel for schedule(static) if (nbanks > 1 && width > 16)
  for (std::int64_t tb = 0; tb < nbanks; ++tb) {
    const auto t = static_cast<std::size_t>(tb);
    const auto& layers = model.bank(t).layers();
    const std::size_t off = model.bank_offset(t);
    for (std::size_t k = 0; k < categories_; ++k) {
      const BankTrace& tr = traces_[k * banks + t];
      std::vector<double> g(dclassifiers.begin() + k * dim + off,
                            dclassifiers.begin() + k * dim + off + width);
      for (std::size_t l = depth; l-- > 0;) {
        if (l + 1 < depth) {
          for (std::size_t i = 0; i < g.size(); ++i) g[i] *= elu_grad(tr.pre[l][i]);
        }
        const std::vector<double>& a_prev = l == 0 ? tr.input : tr.post[l - 1];
        std::vector<double>& dw = grads.tensors[2 * (t * depth + l)];
        std::vector<double>& db = grads.tensors[2 * (t * depth + l) + 1];
        const std::size_t in = a_prev.size();
        for (std::size_t r = 0; r < g.size(); ++r) {
          db[r] += g[r];
          double* row = dw.data() + r * in;
          for (std::size_t c = 0; c < in; ++c) row[c] += g[r] * a_prev[c];
        }
        if (l > 0) {
          std::vector<double> next(in, 0.0);
          const Matrix& w = layers[l].weight;
          for (std::size_t r = 0; r < g.size(); ++r) {
            const auto wr = w.row(r);
            for (std::size_t c = 0; c < in; ++c) next[c] += double(wr[c]) * g[r];
          }
          g = std::move(next);
        }
      }
    }
  }
  return grads;
}

LossReport episode_loss(const MappingModel& model, std::span<const CategoryRepresentation> reps,
                        std::span<const LabeledQuery> queries) {
  EpisodeTape tape;
  return tape.forward(model, reps, queries);
}

LossReport episode_loss(const ClassifierBank& bank, std::span<const LabeledQuery> queries) {
  std::vector<std::size_t> targets;
  for (const LabeledQuery& q : queries) {
    const auto it = std::find(bank.categories.begin(), bank.categories.end(), q.label);
    if (it == bank.categories.end()) {
      throw std::invalid_argument("query label " + std::to_string(q.label) +
                                  " is not among the episode categories");
    }
    targets.push_back(static_cast<std::size_t>(it - bank.categories.begin()));
  }
  const std::size_t dim = bank.classifiers.cols();
  const Matrix qm = stack_queries(queries, dim);
  std::vector<double> f(bank.classifiers.values().begin(), bank.classifiers.values().end());
  return score_and_loss(f, bank.size(), qm, targets, nullptr);
}

GradientSet backward(const MappingModel& model, std::span<const CategoryRepresentation> reps,
                     std::span<const LabeledQuery> queries) {
  EpisodeTape tape;
  tape.forward(model, reps, queries);
  return tape.backward();
}

Sgd::Sgd(SgdConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void Sgd::step(MappingModel& model, const GradientSet& grads) {
  if (!grads.congruent_with(model)) {
    throw ShapeError("sgd_step: gradient set is not shape-congruent with the model");
  }
  auto params = model.parameter_tensors();
  const bool use_momentum = cfg_.momentum > 0.0;
  if (use_momentum && velocity_.tensors.empty()) velocity_ = GradientSet::zeros_like(model);
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      double dir = grads.tensors[i][j];
      if (use_momentum) {
        double& v = velocity_.tensors[i][j];
        v = cfg_.momentum * v + dir;
        dir = v;
      }
      params[i][j] = static_cast<float>(double(params[i][j]) - cfg_.learning_rate * dir);
    }
  }
}

MappingModel sgd_step(MappingModel model, const GradientSet& grads, const SgdConfig& cfg) {
  Sgd opt(cfg);
  opt.step(model, grads);
  return model;
}

GradCheckReport grad_check(const MappingModel& model,
                           std::span<const CategoryRepresentation> reps,
                           std::span<const LabeledQuery> queries, double epsilon, Rng rng,
                           std::size_t min_coords) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("grad_check: epsilon must be positive");
  EpisodeTape base;
  base.forward(model, reps, queries);
  const GradientSet analytic = base.backward();
  const std::vector<double> base_pre = base.elu_preactivations();
  const double guard = 10.0 * epsilon;

  // Flat (tensor, index) addressing over all parameters.
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t i = 0; i < analytic.tensors.size(); ++i) {
    for (std::size_t j = 0; j < analytic.tensors[i].size(); ++j) coords.emplace_back(i, j);
  }
  const auto order = rng.sample_without_replacement(coords.size(), coords.size());

  MappingModel probe = model;
  GradCheckReport report;
  for (std::size_t pick : order) {
    if (report.checked >= min_coords) break;
    const auto [ti, ji] = coords[pick];
    float& p = probe.parameter_tensors()[ti][ji];
    const float original = p;
    const float up = static_cast<float>(double(original) + epsilon);
    const float down = static_cast<float>(double(original) - epsilon);

    EpisodeTape plus, minus;
    p = up;
    const double loss_up = plus.forward(probe, reps, queries).loss;
    p = down;
    const double loss_down = minus.forward(probe, reps, queries).loss;
    p = original;

    const auto pre_up = plus.elu_preactivations();
    const auto pre_down = minus.elu_preactivations();
    bool near_kink = false;
    for (std::size_t i = 0; i < base_pre.size() && !near_kink; ++i) {
      const bool moved = pre_up[i] != base_pre[i] || pre_down[i] != base_pre[i];
      near_kink = moved && std::abs(base_pre[i]) < guard;
    }
    if (near_kink) {
      ++report.rejected;
      continue;
    }

    const double numeric = (loss_up - loss_down) / (double(up) - double(down));
    const double exact = analytic.tensors[ti][ji];
    const double denom = std::max({std::abs(numeric), std::abs(exact), kGradCheckFloor});
    report.max_relative_error = std::max(report.max_relative_error, std::abs(numeric - exact) / denom);
    ++report.checked;
  }
  return report;
}

}  // namespace fsfg
