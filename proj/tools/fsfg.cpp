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

// Command-line front end for the few-shot classifier-mapping library.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "fsfg/episodes.hpp"
#include "fsfg/io.hpp"
#include "fsfg/kernels.hpp"
#include "fsfg/mapping.hpp"
#include "fsfg/train.hpp"

namespace {

using namespace fsfg;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct Options {
  std::uint64_t seed = 0;
  std::size_t c_e = 5;
  std::size_t n_e = 1;
  std::size_t n_q = 20;
  std::size_t episodes = 1000;
  std::size_t layers = 3;
  std::size_t hidden = 1024;
  double lr = 0.1;
  double momentum = 0.0;
  std::size_t trials = 20;
  std::string mapping = "piecewise";
  std::optional<std::string> normalize;

  std::string aux_path, novel_path, model_path, out_path, log_path, input_path;
  std::string val_path;
  double early_stop = 0.0;
  std::size_t val_every = 100;

  std::size_t n_a = 8, n_b = 8;
  std::size_t categories = 20, items = 40;
  std::size_t novel_categories = 0;
  double noise = 0.3;
  double min_angle = 30.0;

  std::size_t min_layers = 1, max_layers = 4;
  std::size_t repetitions = 50;
  std::size_t export_n_e = 5;
  double epsilon = 1e-3;
  std::size_t grad_hidden = 16;
};

void add_episode_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  cmd->add_option("--c-e", o.c_e, "Categories per training episode")->capture_default_str();
  cmd->add_option("--n-e", o.n_e, "Exemplars per category (1 = one-shot, 5 = five-shot)")
      ->capture_default_str();
  cmd->add_option("--n-q", o.n_q, "Queries per category")->capture_default_str();
}

void add_model_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--mapping", o.mapping, "Mapping kind")
      ->check(CLI::IsMember({"piecewise", "global"}))
      ->capture_default_str();
  cmd->add_option("--layers", o.layers, "Affine layers per mapping network")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--hidden", o.hidden, "Hidden width")->capture_default_str();
}

void add_training_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--episodes", o.episodes, "Training episodes")->capture_default_str();
  cmd->add_option("--lr", o.lr, "SGD learning rate")->capture_default_str();
  cmd->add_option("--momentum", o.momentum, "SGD momentum")->capture_default_str();
}

void add_normalize_flag(CLI::App* cmd, Options& o, const std::string& default_value) {
  cmd->add_option("--normalize", o.normalize,
                  "Post-pooling transform (default " + default_value + ")")
      ->check(CLI::IsMember({"none", "sqrt-l2"}));
}

Normalization normalization_or(const Options& o, Normalization fallback) {
  return o.normalize ? parse_normalization(*o.normalize) : fallback;
}

ExperimentConfig experiment_config(const Options& o, Normalization default_norm) {
  ExperimentConfig cfg;
  cfg.seed = o.seed;
  cfg.c_e = o.c_e;
  cfg.n_e = o.n_e;
  cfg.n_q = o.n_q;
  cfg.episodes = o.episodes;
  cfg.trials = o.trials;
  cfg.kind = parse_mapping_kind(o.mapping);
  cfg.shape = {o.layers, o.hidden};
  cfg.sgd = {o.lr, o.momentum};
  cfg.normalization = normalization_or(o, default_norm);
  return cfg;
}

/// Writes to --out when given, else stdout.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::trunc);
      if (!file_) throw std::runtime_error("cannot open '" + path + "' for writing");
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }
  bool to_file() const { return file_.is_open(); }

 private:
  std::ofstream file_;
};

void print_config(const ResultsHeader& h) { std::cout << h.line() << "\n"; }

void report_remapping(const Dataset& data, const std::string& path) {
  if (const auto map = label_remapping(data)) {
    std::cout << "# " << path << ": labels remapped to dense indices:";
    for (std::size_t i = 0; i < map->size(); ++i) std::cout << " " << i << "<-" << (*map)[i];
    std::cout << "\n";
  }
}

Dataset load_split(const std::string& path, DatasetRole role) {
  Dataset d = load_features(path, role);
  report_remapping(d, path);
  return d;
}

int cmd_gen_synthetic(const Options& o) {
  SyntheticSpec spec;
  spec.categories = o.categories;
  spec.items_per_category = o.items;
  spec.n_a = o.n_a;
  spec.n_b = o.n_b;
  spec.noise = o.noise;
  spec.seed = o.seed;
  spec.min_angle_degrees = o.min_angle;
  if (o.novel_categories > 0) spec.novel_categories = o.novel_categories;
  ResultsHeader h;
  h.add("command", "gen-synthetic");
  h.add("seed", std::to_string(spec.seed));
  h.add("categories", std::to_string(spec.categories));
  h.add("novel_categories", std::to_string(spec.novel_count()));
  h.add("items", std::to_string(spec.items_per_category));
  h.add("na", std::to_string(spec.n_a));
  h.add("nb", std::to_string(spec.n_b));
  h.add("noise", format_real(spec.noise));
  h.add("min_angle", format_real(spec.min_angle_degrees));
  print_config(h);
  const SyntheticData data = generate_synthetic(spec);
  save_features(data.auxiliary, o.aux_path);
  save_features(data.novel, o.novel_path);
  std::cout << "wrote " << data.auxiliary.size() << " auxiliary items to " << o.aux_path << "\n"
            << "wrote " << data.novel.size() << " novel items to " << o.novel_path << "\n";
  return 0;
}

int cmd_pool(const Options& o) {
  const Normalization n = normalization_or(o, Normalization::kNone);
  ResultsHeader h;
  h.add("command", "pool");
  h.add("input", o.input_path);
  h.add("out", o.out_path);
  h.add("normalize", to_string(n));
  print_config(h);
  const auto maps = load_feature_maps(o.input_path);
  const Dataset d = pool_feature_maps(maps, n, DatasetRole::kAuxiliary);
  save_features(d, o.out_path);
  std::cout << "pooled " << d.size() << " items (n_a=" << d.dims().n_a << ", n_b=" << d.dims().n_b
            << ") into " << o.out_path << "\n";
  return 0;
}

int cmd_train(const Options& o) {
  const ExperimentConfig cfg = experiment_config(o, Normalization::kNone);
  ResultsHeader h = header_for(cfg);
  h.add("aux", o.aux_path);
  h.add("model", o.model_path);
  if (!o.val_path.empty()) {
    h.add("val", o.val_path);
    h.add("early_stop", format_real(o.early_stop));
    h.add("val_every", std::to_string(o.val_every));
  }
  print_config(h);

  const Dataset aux = normalized(load_split(o.aux_path, DatasetRole::kAuxiliary), cfg.normalization);
  std::optional<Dataset> val;
  if (!o.val_path.empty()) {
    val = normalized(load_split(o.val_path, DatasetRole::kNovel), cfg.normalization);
    check_disjoint(aux, *val);
  }
  const Rng root(cfg.seed);
  MappingModel model = init_model(cfg.kind, aux.dims(), cfg.shape, root.split(streams::kInit));
  std::cout << "# parameters=" << parameter_count(model) << "\n";

  TrainConfig tc;
  tc.episodes = cfg.episodes;
  tc.c_e = cfg.c_e;
  tc.n_e = cfg.n_e;
  tc.n_q = cfg.n_q;
  tc.sgd = cfg.sgd;
  if (val) tc.early_stop = EarlyStop{&*val, o.val_every, cfg.n_e, 5, o.early_stop};

  Output log(o.log_path);
  log.stream() << "episode\tJ\taccuracy\n";
  const TrainResult r = train(aux, std::move(model), tc, root.split(streams::kEpisodes),
                              [&](const EpisodeLog& e) { log.stream() << format_log_line(e) << "\n"; });
  if (r.stopped_early) std::cout << "# stopped early after " << r.log.size() << " episodes\n";
  save_model(r.model, o.model_path);
  std::cout << "saved model to " << o.model_path << "\n";
  return 0;
}

int cmd_eval(const Options& o) {
  const MappingModel model = load_model(o.model_path);
  Options eff = o;
  eff.mapping = to_string(model.kind());
  eff.layers = model.shape().layers;
  eff.hidden = model.shape().hidden;
  const ExperimentConfig cfg = experiment_config(eff, Normalization::kNone);
  ResultsHeader h = header_for(cfg);
  h.add("novel", o.novel_path);
  h.add("model", o.model_path);
  if (!o.out_path.empty()) print_config(h);

  const Dataset novel = normalized(load_split(o.novel_path, DatasetRole::kNovel), cfg.normalization);
  const TrialResult r = evaluate(novel, model, {cfg.n_e, cfg.n_q, cfg.trials},
                                 Rng(cfg.seed).split(streams::kEval));
  Output out(o.out_path);
  write_results(out.stream(), h, r);
  if (out.to_file()) {
    std::cout << "mean\t" << format_real(r.mean) << "\nstd\t" << format_real(r.std) << "\n";
  }
  return 0;
}

int cmd_knn(const Options& o) {
  ExperimentConfig cfg = experiment_config(o, Normalization::kSqrtL2);
  ResultsHeader h;
  h.add("seed", std::to_string(cfg.seed));
  h.add("n_e", std::to_string(cfg.n_e));
  h.add("n_q", std::to_string(cfg.n_q));
  h.add("trials", std::to_string(cfg.trials));
  h.add("method", "knn-cosine");
  h.add("normalize", to_string(cfg.normalization));
  h.add("novel", o.novel_path);
  if (!o.out_path.empty()) print_config(h);
  const Dataset novel = normalized(load_split(o.novel_path, DatasetRole::kNovel), cfg.normalization);
  const TrialResult r = knn_baseline(novel, {cfg.n_e, cfg.n_q, cfg.trials},
                                     Rng(cfg.seed).split(streams::kEval));
  Output out(o.out_path);
  write_results(out.stream(), h, r);
  if (out.to_file()) {
    std::cout << "mean\t" << format_real(r.mean) << "\nstd\t" << format_real(r.std) << "\n";
  }
  return 0;
}

int cmd_ablate(const Options& o) {
  const ExperimentConfig cfg = experiment_config(o, Normalization::kNone);
  ResultsHeader h = header_for(cfg);
  h.add("min_layers", std::to_string(o.min_layers));
  h.add("max_layers", std::to_string(o.max_layers));
  if (!o.out_path.empty()) print_config(h);
  const Dataset aux = load_split(o.aux_path, DatasetRole::kAuxiliary);
  const Dataset novel = load_split(o.novel_path, DatasetRole::kNovel);
  check_disjoint(aux, novel);
  const auto rows = depth_ablation(aux, novel, cfg, o.min_layers, o.max_layers);
  Output out(o.out_path);
  write_depth_table(out.stream(), h, rows);
  return 0;
}

int cmd_compare(const Options& o) {
  const ExperimentConfig cfg = experiment_config(o, Normalization::kNone);
  ResultsHeader h = header_for(cfg);
  if (!o.out_path.empty()) print_config(h);
  const Dataset aux = load_split(o.aux_path, DatasetRole::kAuxiliary);
  const Dataset novel = load_split(o.novel_path, DatasetRole::kNovel);
  check_disjoint(aux, novel);
  const MappingComparison c = compare_mappings(aux, novel, cfg);
  Output out(o.out_path);
  write_comparison(out.stream(), h, c, cfg.shape.hidden);
  return 0;
}

int cmd_paramcount(const Options& o) {
  const MappingKind kind = parse_mapping_kind(o.mapping);
  const MappingDims dims{o.n_a, o.n_b};
  const MlpShape shape{o.layers, o.hidden};
  ResultsHeader h;
  h.add("command", "paramcount");
  h.add("mapping", to_string(kind));
  h.add("na", std::to_string(dims.n_a));
  h.add("nb", std::to_string(dims.n_b));
  h.add("layers", std::to_string(shape.layers));
  h.add("hidden", std::to_string(shape.hidden));
  print_config(h);
  std::cout << parameter_count(kind, dims, shape) << "\n";
  return 0;
}

int cmd_export(const Options& o) {
  const MappingModel model = load_model(o.model_path);
  const Normalization n = normalization_or(o, Normalization::kNone);
  ResultsHeader h;
  h.add("command", "export-classifiers");
  h.add("seed", std::to_string(o.seed));
  h.add("n_e", std::to_string(o.export_n_e));
  h.add("repetitions", std::to_string(o.repetitions));
  h.add("normalize", to_string(n));
  h.add("model", o.model_path);
  h.add("novel", o.novel_path);
  h.add("out", o.out_path);
  print_config(h);
  const Dataset novel = normalized(load_split(o.novel_path, DatasetRole::kNovel), n);
  export_classifiers(novel, model, o.export_n_e, o.repetitions, Rng(o.seed).split(streams::kExport),
                     o.out_path);
  std::cout << "wrote " << novel.categories().size() * o.repetitions << " classifier rows to "
            << o.out_path << "\n";
  return 0;
}

int cmd_gradcheck(const Options& o) {
  const MappingKind kind = parse_mapping_kind(o.mapping);
  ResultsHeader h;
  h.add("command", "gradcheck");
  h.add("seed", std::to_string(o.seed));
  h.add("mapping", to_string(kind));
  h.add("na", std::to_string(o.n_a));
  h.add("nb", std::to_string(o.n_b));
  h.add("layers", std::to_string(o.layers));
  h.add("hidden", std::to_string(o.grad_hidden));
  h.add("c_e", std::to_string(o.c_e));
  h.add("n_e", std::to_string(o.n_e));
  h.add("n_q", std::to_string(o.n_q));
  h.add("epsilon", format_real(o.epsilon));
  print_config(h);

  SyntheticSpec spec;
  spec.categories = o.c_e + 1;
  spec.novel_categories = 1;
  spec.items_per_category = o.n_e + o.n_q;
  spec.n_a = o.n_a;
  spec.n_b = o.n_b;
  spec.seed = o.seed;
  spec.min_angle_degrees = 0.0;
  const SyntheticData data = generate_synthetic(spec);
  const Rng root(o.seed);
  Rng ep_rng = root.split(streams::kEpisodes);
  const Episode ep = sample_episode(data.auxiliary, o.c_e, o.n_e, o.n_q, ep_rng);
  const MappingModel model =
      init_model(kind, data.auxiliary.dims(), {o.layers, o.grad_hidden}, root.split(streams::kInit));
  const GradCheckReport r = grad_check(model, exemplar_representations(data.auxiliary, ep),
                                       episode_queries(data.auxiliary, ep), o.epsilon,
                                       root.split(streams::kGradCheck));
  std::cout << "checked\t" << r.checked << "\nrejected\t" << r.rejected << "\nmax_rel_error\t"
            << format_real(r.max_relative_error) << "\n";
  if (!(r.max_relative_error < 1e-3)) {
    std::cerr << "gradient check failed: max relative error " << r.max_relative_error
              << " >= 1e-3\n";
    return kExitNumerical;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Few-shot fine-grained classifier mapping: training, evaluation and baselines"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-synthetic", "Generate auxiliary/novel synthetic feature files");
  gen->add_option("--out-aux", o.aux_path, "Auxiliary split output")->required();
  gen->add_option("--out-novel", o.novel_path, "Novel split output")->required();
  gen->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  gen->add_option("--categories", o.categories, "Total categories")->capture_default_str();
  gen->add_option("--novel-categories", o.novel_categories, "Novel categories (default: a quarter)");
  gen->add_option("--items", o.items, "Items per category")->capture_default_str();
  gen->add_option("--na", o.n_a, "Sub-vector length")->capture_default_str();
  gen->add_option("--nb", o.n_b, "Number of sub-vectors")->capture_default_str();
  gen->add_option("--noise", o.noise, "Gaussian noise scale")->capture_default_str();
  gen->add_option("--min-angle", o.min_angle, "Minimum planted angle (degrees)")
      ->capture_default_str();

  auto* pool_cmd = app.add_subcommand("pool", "Pool feature-map pairs into a feature file");
  pool_cmd->add_option("--input", o.input_path, "Feature-map file")->required()->check(CLI::ExistingFile);
  pool_cmd->add_option("--out", o.out_path, "Feature file output")->required();
  add_normalize_flag(pool_cmd, o, "none");

  auto* train_cmd = app.add_subcommand("train", "Episodic training on the auxiliary split");
  train_cmd->add_option("--aux", o.aux_path, "Auxiliary feature file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--model", o.model_path, "Checkpoint output")->required();
  train_cmd->add_option("--log", o.log_path, "Training log file (default stdout)");
  train_cmd->add_option("--val", o.val_path, "Validation feature file for early stopping")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--early-stop", o.early_stop, "Stop once validation accuracy reaches this");
  train_cmd->add_option("--val-every", o.val_every, "Episodes between validation checks")
      ->capture_default_str();
  add_episode_flags(train_cmd, o);
  add_model_flags(train_cmd, o);
  add_training_flags(train_cmd, o);
  add_normalize_flag(train_cmd, o, "none");

  auto* eval_cmd = app.add_subcommand("eval", "Repeated-trial evaluation on the novel split");
  eval_cmd->add_option("--novel", o.novel_path, "Novel feature file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--model", o.model_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", o.out_path, "Results file (default stdout)");
  eval_cmd->add_option("--trials", o.trials, "Evaluation trials")->capture_default_str();
  add_episode_flags(eval_cmd, o);
  add_normalize_flag(eval_cmd, o, "none");

  auto* knn_cmd = app.add_subcommand("knn", "Cosine nearest-neighbour baseline");
  knn_cmd->add_option("--novel", o.novel_path, "Novel feature file")->required()->check(CLI::ExistingFile);
  knn_cmd->add_option("--out", o.out_path, "Results file (default stdout)");
  knn_cmd->add_option("--trials", o.trials, "Evaluation trials")->capture_default_str();
  add_episode_flags(knn_cmd, o);
  add_normalize_flag(knn_cmd, o, "sqrt-l2");

  auto* ablate = app.add_subcommand("ablate-depth", "Train and evaluate one model per depth");
  ablate->add_option("--aux", o.aux_path, "Auxiliary feature file")->required()->check(CLI::ExistingFile);
  ablate->add_option("--novel", o.novel_path, "Novel feature file")->required()->check(CLI::ExistingFile);
  ablate->add_option("--out", o.out_path, "Table output (default stdout)");
  ablate->add_option("--min-layers", o.min_layers, "First depth")->capture_default_str();
  ablate->add_option("--max-layers", o.max_layers, "Last depth")->capture_default_str();
  ablate->add_option("--trials", o.trials, "Evaluation trials")->capture_default_str();
  add_episode_flags(ablate, o);
  add_model_flags(ablate, o);
  add_training_flags(ablate, o);
  add_normalize_flag(ablate, o, "none");

  auto* compare = app.add_subcommand(
      "compare", "Piecewise vs parameter-matched global mapping with a paired t-test");
  compare->add_option("--aux", o.aux_path, "Auxiliary feature file")->required()->check(CLI::ExistingFile);
  compare->add_option("--novel", o.novel_path, "Novel feature file")->required()->check(CLI::ExistingFile);
  compare->add_option("--out", o.out_path, "Report output (default stdout)");
  compare->add_option("--trials", o.trials, "Evaluation trials")->capture_default_str();
  add_episode_flags(compare, o);
  add_model_flags(compare, o);
  add_training_flags(compare, o);
  add_normalize_flag(compare, o, "none");

  auto* params = app.add_subcommand("paramcount", "Closed-form parameter count of a mapping");
  params->add_option("--na", o.n_a, "Sub-vector length")->capture_default_str();
  params->add_option("--nb", o.n_b, "Number of sub-vectors")->capture_default_str();
  add_model_flags(params, o);

  auto* export_cmd = app.add_subcommand("export-classifiers",
                                        "Write generated classifiers for external projection");
  export_cmd->add_option("--novel", o.novel_path, "Feature file")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--model", o.model_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--out", o.out_path, "Output file")->required();
  export_cmd->add_option("--repetitions", o.repetitions, "Exemplar draws per category")
      ->capture_default_str();
  export_cmd->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  export_cmd->add_option("--n-e", o.export_n_e, "Exemplars per draw")->capture_default_str();
  add_normalize_flag(export_cmd, o, "none");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the episode gradient");
  grad->add_option("--na", o.n_a, "Sub-vector length")->capture_default_str();
  grad->add_option("--nb", o.n_b, "Number of sub-vectors")->capture_default_str();
  grad->add_option("--epsilon", o.epsilon, "Central-difference step")->capture_default_str();
  grad->add_option("--mapping", o.mapping, "Mapping kind")
      ->check(CLI::IsMember({"piecewise", "global"}))
      ->capture_default_str();
  grad->add_option("--layers", o.layers, "Affine layers per mapping network")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  grad->add_option("--hidden", o.grad_hidden, "Hidden width")->capture_default_str();
  add_episode_flags(grad, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (app.get_subcommands().empty()) std::cerr << app.help();
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_synthetic(o);
    if (*pool_cmd) return cmd_pool(o);
    if (*train_cmd) return cmd_train(o);
    if (*eval_cmd) return cmd_eval(o);
    if (*knn_cmd) return cmd_knn(o);
    if (*ablate) return cmd_ablate(o);
    if (*compare) return cmd_compare(o);
    if (*params) return cmd_paramcount(o);
    if (*export_cmd) return cmd_export(o);
    if (*grad) return cmd_gradcheck(o);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
