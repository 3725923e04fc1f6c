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

#include "fsfg/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "binary_io.hpp"

namespace fsfg {

namespace detail {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

}  // namespace detail

namespace {
constexpr std::string_view kFeatureMagic = "FSFG1";
constexpr std::string_view kFeatureMapMagic = "FSFM1";
}  // namespace

std::vector<std::uint8_t> encode_features(const Dataset& data) {
  detail::ByteWriter w;
  w.magic(kFeatureMagic);
  w.u32(kFeatureFileVersion);
  w.u32(static_cast<std::uint32_t>(data.dims().n_a));
  w.u32(static_cast<std::uint32_t>(data.dims().n_b));
  w.u32(static_cast<std::uint32_t>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    w.u32(data.labels()[i]);
    w.f32s(data.features()[i].data());
  }
  return std::move(w.bytes());
}

Dataset decode_features(std::span<const std::uint8_t> bytes, DatasetRole role) {
  detail::ByteReader r(bytes);
  r.expect_magic(kFeatureMagic);
  const std::uint32_t version = r.u32("version");
  if (version != kFeatureFileVersion) {
    throw FormatError("unsupported feature file version " + std::to_string(version) +
                      " at byte offset " + std::to_string(r.offset() - 4));
  }
  MappingDims dims;
  dims.n_a = r.u32("n_a");
  dims.n_b = r.u32("n_b");
  const std::uint32_t count = r.u32("item count");
  const std::size_t item_bytes = 4 + 4 * dims.feature_dim();
  const std::size_t expected = static_cast<std::size_t>(count) * item_bytes;
  if (r.remaining() != expected) {
    throw FormatError("feature payload at byte offset " + std::to_string(r.offset()) +
                      ": expected " + std::to_string(expected) + " bytes for " +
                      std::to_string(count) + " items, have " + std::to_string(r.remaining()));
  }
  std::vector<BilinearFeature> features;
  std::vector<Label> labels;
  features.reserve(count);
  labels.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    labels.push_back(r.u32("label"));
    BilinearFeature f(dims.n_a, dims.n_b);
    r.f32s(f.data(), "feature values");
    for (float v : f.data()) {
      if (!std::isfinite(v)) {
        throw FormatError("non-finite feature value in item " + std::to_string(i) +
                          " ending at byte offset " + std::to_string(r.offset()));
      }
    }
    features.push_back(std::move(f));
  }
  return Dataset(dims, std::move(features), std::move(labels), role);
}

void save_features(const Dataset& data, const std::filesystem::path& path) {
  detail::write_file(path, encode_features(data));
}

Dataset load_features(const std::filesystem::path& path, DatasetRole role) {
  return decode_features(detail::read_file(path), role);
}

std::optional<std::vector<Label>> label_remapping(const Dataset& data) {
  const auto& cats = data.categories();
  for (std::size_t i = 0; i < cats.size(); ++i) {
    if (cats[i] != i) return cats;
  }
  return std::nullopt;
}

void save_feature_maps(std::span<const FeatureMapItem> items, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.magic(kFeatureMapMagic);
  w.u32(kFeatureFileVersion);
  const std::size_t n_a = items.empty() ? 0 : items.front().stream_a.channels();
  const std::size_t n_b = items.empty() ? 0 : items.front().stream_b.channels();
  const std::size_t locs = items.empty() ? 0 : items.front().stream_a.locations();
  w.u32(static_cast<std::uint32_t>(n_a));
  w.u32(static_cast<std::uint32_t>(n_b));
  w.u32(static_cast<std::uint32_t>(locs));
  w.u32(static_cast<std::uint32_t>(items.size()));
  for (const auto& item : items) {
    if (item.stream_a.channels() != n_a || item.stream_b.channels() != n_b ||
        item.stream_a.locations() != locs || item.stream_b.locations() != locs) {
      throw ShapeError("feature maps of one file must share a shape: " +
                       to_string(item.stream_a.values().shape()) + " and " +
                       to_string(item.stream_b.values().shape()));
    }
    w.u32(item.label);
    w.f32s(item.stream_a.values().values());
    w.f32s(item.stream_b.values().values());
  }
  detail::write_file(path, w.bytes());
}

std::vector<FeatureMapItem> load_feature_maps(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(bytes);
  r.expect_magic(kFeatureMapMagic);
  const std::uint32_t version = r.u32("version");
  if (version != kFeatureFileVersion) {
    throw FormatError("unsupported feature-map file version " + std::to_string(version) +
                      " at byte offset " + std::to_string(r.offset() - 4));
  }
  const std::size_t n_a = r.u32("n_a");
  const std::size_t n_b = r.u32("n_b");
  const std::size_t locs = r.u32("location count");
  const std::uint32_t count = r.u32("item count");
  if (locs == 0 && count > 0) {
    throw FormatError("feature maps need at least one location (byte offset " +
                      std::to_string(r.offset() - 8) + ")");
  }
  const std::size_t expected = std::size_t(count) * (4 + 4 * (n_a + n_b) * locs);
  if (r.remaining() != expected) {
    throw FormatError("feature-map payload at byte offset " + std::to_string(r.offset()) +
                      ": expected " + std::to_string(expected) + " bytes, have " +
                      std::to_string(r.remaining()));
  }
  std::vector<FeatureMapItem> items;
  for (std::uint32_t i = 0; i < count; ++i) {
    FeatureMapItem item;
    item.label = r.u32("label");
    Matrix a(n_a, locs), b(n_b, locs);
    r.f32s(a.values(), "stream A");
    r.f32s(b.values(), "stream B");
    item.stream_a = FeatureMap(std::move(a));
    item.stream_b = FeatureMap(std::move(b));
    items.push_back(std::move(item));
  }
  return items;
}

Dataset pool_feature_maps(std::span<const FeatureMapItem> items, Normalization n,
                          DatasetRole role) {
  if (items.empty()) throw DegenerateInput("no feature maps to pool");
  std::vector<BilinearFeature> features;
  std::vector<Label> labels;
  for (const auto& item : items) {
    features.push_back(apply_normalization(pool(item.stream_a, item.stream_b), n));
    labels.push_back(item.label);
  }
  const MappingDims dims{items.front().stream_a.channels(), items.front().stream_b.channels()};
  return Dataset(dims, std::move(features), std::move(labels), role);
}

std::size_t SyntheticSpec::novel_count() const {
  return novel_categories.value_or(static_cast<std::size_t>(std::lround(categories / 4.0)));
}

void SyntheticSpec::validate() const {
  if (n_a == 0 || n_b == 0) throw std::invalid_argument("synthetic n_a and n_b must be positive");
  if (items_per_category == 0) throw std::invalid_argument("items per category must be positive");
  if (!(noise >= 0.0) || !std::isfinite(noise)) {
    throw std::invalid_argument("noise scale must be finite and non-negative");
  }
  const std::size_t novel = novel_count();
  if (novel == 0 || novel >= categories) {
    throw std::invalid_argument("need at least one auxiliary and one novel category (categories=" +
                                std::to_string(categories) + ", novel=" +
                                std::to_string(novel) + ")");
  }
  if (!(min_angle_degrees >= 0.0 && min_angle_degrees < 90.0)) {
    throw std::invalid_argument("minimum angle must lie in [0, 90) degrees");
  }
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const Rng root = Rng(spec.seed).split(streams::kSynthetic);
  Rng mean_rng = root.split("means");
  Rng item_rng = root.split("items");
  const double max_cos = std::cos(spec.min_angle_degrees * std::numbers::pi / 180.0);

  std::vector<std::vector<std::vector<float>>> means(
      spec.categories, std::vector<std::vector<float>>(spec.n_b));
  for (std::size_t t = 0; t < spec.n_b; ++t) {
    for (std::size_t c = 0; c < spec.categories; ++c) {
      bool placed = false;
      for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
        std::vector<float> dir(spec.n_a);
        double nrm = 0.0;
        for (float& v : dir) {
          v = static_cast<float>(mean_rng.normal());
          nrm += double(v) * v;
        }
        if (nrm == 0.0) continue;
        const double inv = 1.0 / std::sqrt(nrm);
        for (float& v : dir) v = static_cast<float>(v * inv);
        placed = true;
        for (std::size_t o = 0; o < c && placed; ++o) {
          placed = dot(dir, means[o][t]) < max_cos;
        }
        if (placed) means[c][t] = std::move(dir);
      }
      if (!placed) {
        throw std::invalid_argument("cannot place " + std::to_string(spec.categories) +
                                    " directions in " + std::to_string(spec.n_a) +
                                    " dimensions at minimum angle " +
                                    format_real(spec.min_angle_degrees) + " degrees");
      }
    }
  }

  const std::size_t aux_count = spec.categories - spec.novel_count();
  std::vector<BilinearFeature> aux_f, nov_f;
  std::vector<Label> aux_l, nov_l;
  for (std::size_t c = 0; c < spec.categories; ++c) {
    for (std::size_t i = 0; i < spec.items_per_category; ++i) {
      BilinearFeature f(spec.n_a, spec.n_b);
      for (std::size_t t = 0; t < spec.n_b; ++t) {
        auto sub = f.sub_vector(t);
        for (std::size_t j = 0; j < spec.n_a; ++j) {
          sub[j] = static_cast<float>(double(means[c][t][j]) + spec.noise * item_rng.normal());
        }
      }
      const bool novel = c >= aux_count;
      (novel ? nov_f : aux_f).push_back(std::move(f));
      (novel ? nov_l : aux_l).push_back(static_cast<Label>(c));
    }
  }
  const MappingDims dims{spec.n_a, spec.n_b};
  return {Dataset(dims, std::move(aux_f), std::move(aux_l), DatasetRole::kAuxiliary),
          Dataset(dims, std::move(nov_f), std::move(nov_l), DatasetRole::kNovel),
          std::move(means)};
}

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

std::string format_real(float v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

std::string format_log_line(const EpisodeLog& entry) {
  return std::to_string(entry.episode) + "\t" + format_real(entry.loss) + "\t" +
         format_real(entry.accuracy);
}

std::string ResultsHeader::line() const {
  std::string s = "#";
  for (std::size_t i = 0; i < fields.size(); ++i) {
    s += i == 0 ? " " : "\t";
    s += fields[i].first + "=" + fields[i].second;
  }
  return s;
}

ResultsHeader header_for(const ExperimentConfig& cfg) {
  ResultsHeader h;
  h.add("seed", std::to_string(cfg.seed));
  h.add("c_e", std::to_string(cfg.c_e));
  h.add("n_e", std::to_string(cfg.n_e));
  h.add("n_q", std::to_string(cfg.n_q));
  h.add("trials", std::to_string(cfg.trials));
  h.add("mapping", to_string(cfg.kind));
  h.add("layers", std::to_string(cfg.shape.layers));
  h.add("hidden", std::to_string(cfg.shape.hidden));
  h.add("episodes", std::to_string(cfg.episodes));
  h.add("lr", format_real(cfg.sgd.learning_rate));
  h.add("momentum", format_real(cfg.sgd.momentum));
  h.add("normalize", to_string(cfg.normalization));
  return h;
}

void write_ttest(std::ostream& out, const TTestReport& t) {
  out << "ttest\tt=" << format_real(t.t) << "\tdf=" << t.df << "\tp=" << format_real(t.p_value)
      << "\tsignificant=" << (t.significant ? 1 : 0) << "\n";
}

void write_results(std::ostream& out, const ResultsHeader& header, const TrialResult& result,
                   const std::optional<TTestReport>& ttest) {
  out << header.line() << "\n";
  out << "trial\taccuracy\n";
  for (std::size_t i = 0; i < result.accuracies.size(); ++i) {
    out << i << "\t" << format_real(result.accuracies[i]) << "\n";
  }
  out << "mean\t" << format_real(result.mean) << "\n";
  out << "std\t" << format_real(result.std) << "\n";
  if (ttest) write_ttest(out, *ttest);
}

std::vector<std::size_t> export_draw(const Dataset& data, std::size_t k, std::size_t rep,
                                     std::size_t n_e, const Rng& rng) {
  const auto& items = data.items_of(data.categories().at(k));
  Rng draw = rng.split(k).split(rep);
  const auto picks = draw.sample_without_replacement(items.size(), n_e);
  std::vector<std::size_t> out;
  for (std::size_t p : picks) out.push_back(items[p]);
  return out;
}

std::vector<ClassifierRow> collect_classifiers(const Dataset& data, const MappingModel& model,
                                               std::size_t n_e, std::size_t repetitions,
                                               const Rng& rng) {
  std::vector<ClassifierRow> rows;
  std::vector<BilinearFeature> group;
  for (std::size_t k = 0; k < data.categories().size(); ++k) {
    const Label label = data.categories()[k];
    for (std::size_t r = 0; r < repetitions; ++r) {
      group.clear();
      for (std::size_t i : export_draw(data, k, r, n_e, rng)) group.push_back(data.features()[i]);
      rows.push_back({label, r, generate_classifier(model, category_mean(group, label))});
    }
  }
  return rows;
}

void write_classifier_rows(std::ostream& out, std::span<const ClassifierRow> rows) {
  for (const auto& row : rows) {
    out << row.label << "\t" << row.repetition;
    for (float v : row.values) out << "\t" << format_real(v);
    out << "\n";
  }
}

void write_bank(std::ostream& out, const ClassifierBank& bank, std::size_t repetition) {
  for (std::size_t k = 0; k < bank.size(); ++k) {
    out << bank.categories[k] << "\t" << repetition;
    for (float v : bank.classifiers.row(k)) out << "\t" << format_real(v);
    out << "\n";
  }
}

std::vector<ClassifierRow> read_classifier_rows(std::istream& in) {
  std::vector<ClassifierRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string_view> cells;
    std::string_view rest = line;
    while (true) {
      const auto tab = rest.find('\t');
      cells.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (cells.size() < 3) {
      throw FormatError("classifier row " + std::to_string(lineno) + " has too few fields");
    }
    auto parse = [&](std::string_view cell, auto& value) {
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw FormatError("bad field '" + std::string(cell) + "' on classifier row " +
                          std::to_string(lineno));
      }
    };
    ClassifierRow row;
    parse(cells[0], row.label);
    parse(cells[1], row.repetition);
    row.values.resize(cells.size() - 2);
    for (std::size_t i = 2; i < cells.size(); ++i) parse(cells[i], row.values[i - 2]);
    rows.push_back(std::move(row));
  }
  return rows;
}

void export_classifiers(const Dataset& data, const MappingModel& model, std::size_t n_e,
                        std::size_t repetitions, const Rng& rng,
                        const std::filesystem::path& path) {
  const auto rows = collect_classifiers(data, model, n_e, repetitions, rng);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  write_classifier_rows(out, rows);
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

void write_depth_table(std::ostream& out, const ResultsHeader& header,
                       std::span<const DepthRow> rows) {
  out << header.line() << "\n";
  out << "layers\tparameters\tmean\tstd";
  const std::size_t trials = rows.empty() ? 0 : rows.front().result.accuracies.size();
  for (std::size_t i = 0; i < trials; ++i) out << "\ttrial" << i;
  out << "\n";
  for (const auto& row : rows) {
    out << row.layers << "\t" << row.parameters << "\t" << format_real(row.result.mean) << "\t"
        << format_real(row.result.std);
    for (double a : row.result.accuracies) out << "\t" << format_real(a);
    out << "\n";
  }
}

void write_comparison(std::ostream& out, const ResultsHeader& header,
                      const MappingComparison& c, std::size_t piecewise_hidden) {
  out << header.line() << "\n";
  out << "mapping\tparameters\thidden\tmean\tstd\n";
  out << "piecewise\t" << c.piecewise_parameters << "\t" << piecewise_hidden << "\t"
      << format_real(c.piecewise.mean) << "\t" << format_real(c.piecewise.std) << "\n";
  out << "global\t" << c.global_parameters << "\t" << c.global_hidden << "\t"
      << format_real(c.global.mean) << "\t" << format_real(c.global.std) << "\n";
  out << "trial\tpiecewise\tglobal\n";
  for (std::size_t i = 0; i < c.piecewise.accuracies.size(); ++i) {
    out << i << "\t" << format_real(c.piecewise.accuracies[i]) << "\t"
        << format_real(c.global.accuracies[i]) << "\n";
  }
  write_ttest(out, c.ttest);
}

}  // namespace fsfg
