#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "vqa/binary_io.hpp"
#include "vqa/checkpoint.hpp"
#include "vqa/config.hpp"
#include "vqa/errors.hpp"
#include "vqa/gradcheck_command.hpp"
#include "vqa/heatmap.hpp"
#include "vqa/search.hpp"
#include "vqa/train.hpp"

namespace vqa::cli {

namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitUsage;
  if (dynamic_cast<const DataError*>(&e)) return kExitData;
  if (dynamic_cast<const ShapeError*>(&e)) return kExitData;
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kExitData;
  return kExitUsage;
}

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--config", common.config_path, "Config file (JSON)");
  cmd->add_option("--seed", common.seed, "Override the run seed");
  cmd->add_option("--out-dir", common.out_dir, "Override paths.out_dir");
}

TrainConfig resolve(const Common& common, const TrainConfig& fallback = TrainConfig{}) {
  TrainConfig config = common.config_path.empty() ? fallback : load_config(common.config_path);
  if (common.seed) config.seed = *common.seed;
  if (!common.out_dir.empty()) config.paths.out_dir = common.out_dir;
  config.validate();
  return config;
}

void print(const std::string& text) { std::fputs(text.c_str(), stdout); }

// Model from the checkpoint, data from --config (or the checkpoint's own
// config when none is given).
struct Restored {
  TrainConfig config;
  ParamStore params;
  TrainingData data;
};

Restored restore(const Common& common, const std::string& checkpoint_path) {
  TrainConfig data_config = common.config_path.empty() ? TrainConfig{} : resolve(common);
  const fs::path path = checkpoint_path.empty()
                            ? fs::path(common.out_dir.empty() ? data_config.paths.out_dir : common.out_dir) / "checkpoint.bin"
                            : fs::path(checkpoint_path);
  Checkpoint checkpoint = load_checkpoint(path);
  Restored r;
  r.config = checkpoint_config(checkpoint);
  if (common.config_path.empty()) data_config = r.config;
  if (!common.out_dir.empty()) data_config.paths.out_dir = common.out_dir;
  if (data_config.paths.out_dir.empty()) data_config.paths.out_dir = path.parent_path().string();
  data_config.model = r.config.model;
  r.config.paths = data_config.paths;
  r.data = load_training_data(data_config);
  check_dimensions(r.config.model, r.data);
  const Tensor& table = checkpoint.params.get(kEmbeddingParam);
  if (table.shape().at(0) != r.data.words.size()) {
    throw DataError("checkpoint embedding has " + std::to_string(table.shape().at(0)) + " rows, vocabulary has " +
                    std::to_string(r.data.words.size()));
  }
  r.params = std::move(checkpoint.params);
  return r;
}

const std::vector<VqaExample>& pick_split(const TrainingData& data, const std::string& split) {
  if (split == "train") return data.train;
  if (split == "val") return data.val;
  throw ConfigError("--split must be train or val, got '" + split + "'");
}

int cmd_train(const Common& common) {
  const TrainConfig config = resolve(common);
  const RunRecord record = train(config);
  std::printf("trained %zu epochs, best val_acc %.6f at epoch %zu (%.1fs); wrote %s\n", record.epochs.size(),
              record.best_val_acc, record.best_epoch, record.wall_seconds, config.paths.out_dir.c_str());
  return kExitOk;
}

int cmd_eval(const Common& common, const std::string& checkpoint, const std::string& split, const std::string& data_path) {
  const Restored r = restore(common, checkpoint);
  std::vector<VqaExample> loaded;
  if (!data_path.empty()) loaded = load_dataset(data_path, r.data.words, r.data.answers, r.config.model.max_question_length);
  const std::vector<VqaExample>& examples = data_path.empty() ? pick_split(r.data, split) : loaded;
  for (const VqaExample& ex : examples) {
    if (!r.data.features.contains(ex.image_id)) throw DataError("example " + ex.id + " refers to missing image " + ex.image_id);
  }
  const EvalResult result = evaluate(r.config.model, r.params, examples, r.data.features, r.data.answers);
  const fs::path dir = r.config.paths.out_dir;
  fs::create_directories(dir);
  io::write_file(dir / "predictions.csv", predictions_csv(result));
  std::printf("accuracy %.17g over %zu examples; wrote %s\n", result.accuracy, result.predictions.size(),
              (dir / "predictions.csv").string().c_str());
  return kExitOk;
}

int cmd_search(const Common& common, std::optional<std::size_t> budget) {
  const TrainConfig config = resolve(common);
  const TrainingData data = load_training_data(config);
  check_dimensions(config.model, data);
  const SearchResult result = greedy_search(config.search, config, budget.value_or(config.search_budget),
                                            training_runner(data));
  const fs::path dir = config.paths.out_dir;
  fs::create_directories(dir);
  io::write_file(dir / "search.csv", search_csv(result));
  save_config(dir / "best_config.json", result.best);
  print(search_csv(result));
  std::printf("%zu runs; best config written to %s\n", result.runs.size(), (dir / "best_config.json").string().c_str());
  return kExitOk;
}

int cmd_gradcheck(const Common& common, std::optional<std::size_t> seeds, const std::string& corrupt) {
  TrainConfig config = resolve(common, tiny_gradcheck_config());
  if (seeds) config.gradcheck.seeds = *seeds;
  const GradcheckReport report =
      run_gradcheck(config, corrupt.empty() ? std::nullopt : std::optional<std::string>(corrupt));
  print(format_report(report));
  return report.passed() ? kExitOk : kExitNumeric;
}

int cmd_synth(const Common& common, const std::string& task, std::optional<std::size_t> n) {
  TrainConfig config = resolve(common);
  if (common.seed) config.synthetic.seed = *common.seed;
  if (!task.empty()) config.synthetic.task = parse_synthetic_task(task);
  if (n) config.synthetic.n = *n;
  const SyntheticData data = make_synthetic(config.synthetic);
  const fs::path dir = config.paths.out_dir;
  write_synthetic(dir, data);

  // A config that trains on the files just written.
  TrainConfig out = config;
  out.paths.train = (dir / "train.jsonl").string();
  out.paths.val = (dir / "val.jsonl").string();
  out.paths.features = (dir / "features.bin").string();
  out.paths.feature_index = (dir / "features.idx").string();
  out.paths.vectors = (dir / "vectors.txt").string();
  out.paths.answers = (dir / "answers.txt").string();
  out.paths.out_dir = (dir / "run").string();
  out.model.regions = config.synthetic.regions;
  out.model.feature_dim = config.synthetic.feature_width;
  out.model.embed_dim = config.synthetic.embed_dim;
  out.model.num_answers = data.answers.size();
  save_config(dir / "config.json", out);
  std::printf("wrote %zu train / %zu val examples (%zu answers) to %s\n", data.train.size(), data.val.size(),
              data.answers.size(), dir.string().c_str());
  return kExitOk;
}

int cmd_heatmap(const Common& common, const std::string& checkpoint, const std::string& split, const std::string& id) {
  const Restored r = restore(common, checkpoint);
  const std::vector<VqaExample>& examples = pick_split(r.data, split);
  if (examples.empty()) throw DataError("no examples in split " + split);
  const VqaExample* example = &examples.front();
  if (!id.empty()) {
    example = nullptr;
    for (const VqaExample& ex : examples) {
      if (ex.id == id) example = &ex;
    }
    if (example == nullptr) throw DataError("no example with id " + id + " in split " + split);
  }
  const Heatmap map = compute_heatmap(r.config.model, r.params, *example, r.data.features);
  const fs::path text = fs::path(r.config.paths.out_dir) / ("heatmap_" + example->id + ".txt");
  for (const fs::path& p : export_heatmap(map, text)) std::printf("wrote %s\n", p.string().c_str());
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Attention VQA model: training, evaluation and diagnostics"};
  app.require_subcommand(1);

  Common common;
  std::string checkpoint, split = "val", data_path, example_id, corrupt, task;
  std::optional<std::size_t> budget, seeds, n;

  CLI::App* train_cmd = app.add_subcommand("train", "Train a model and write metrics and checkpoint");
  add_common(train_cmd, common);

  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint (default <out-dir>/checkpoint.bin)");
  eval_cmd->add_option("--split", split, "train or val");
  eval_cmd->add_option("--data", data_path, "Evaluate this JSONL file instead of a split");

  CLI::App* search_cmd = app.add_subcommand("search", "Greedy per-axis hyperparameter search");
  add_common(search_cmd, common);
  search_cmd->add_option("--budget", budget, "Maximum number of runs");

  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the full model");
  add_common(grad_cmd, common);
  grad_cmd->add_option("--seeds", seeds, "Number of seeds");
  grad_cmd->add_option("--corrupt-op", corrupt, "Break one backward rule (fixture for testing the checker)");

  CLI::App* synth_cmd = app.add_subcommand("synth-data", "Write a synthetic needle dataset");
  add_common(synth_cmd, common);
  synth_cmd->add_option("--task", task, "single or dual");
  synth_cmd->add_option("--n", n, "Total examples");

  CLI::App* heat_cmd = app.add_subcommand("heatmap", "Export attention weights for one example");
  add_common(heat_cmd, common);
  heat_cmd->add_option("--checkpoint", checkpoint, "Checkpoint (default <out-dir>/checkpoint.bin)");
  heat_cmd->add_option("--split", split, "train or val");
  heat_cmd->add_option("--example", example_id, "Example id (default: first of the split)");

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(common);
    if (*eval_cmd) return cmd_eval(common, checkpoint, split, data_path);
    if (*search_cmd) return cmd_search(common, budget);
    if (*grad_cmd) return cmd_gradcheck(common, seeds, corrupt);
    if (*synth_cmd) return cmd_synth(common, task, n);
    if (*heat_cmd) return cmd_heatmap(common, checkpoint, split, example_id);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  }
  return kExitUsage;
}

}  // namespace vqa::cli
