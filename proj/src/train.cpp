#include "vqa/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "vqa/binary_io.hpp"
#include "vqa/log.hpp"
#include "vqa/optim.hpp"

namespace vqa {

namespace {

const std::string& required(const std::string& path, const char* key) {
  if (path.empty()) throw ConfigError(std::string("paths.") + key + " must be set");
  return path;
}

std::string parameter_norms(const ParamStore& params) {
  std::ostringstream out;
  for (const std::string& name : params.names()) {
    double sq = 0.0;
    for (double v : params.get(name).data()) sq += v * v;
    out << "  " << name << " " << std::sqrt(sq) << "\n";
  }
  return out.str();
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

TrainingData from_synthetic(const SyntheticData& data, const ModelConfig& model) {
  TrainingData out;
  out.words = data.words;
  out.table.vectors = data.word_vectors;
  out.table.trainable.assign(data.words.size(), model.finetune_embeddings);
  out.table.trainable[kPadIndex] = false;
  out.table.trainable[kUnkIndex] = true;
  out.answers = data.answers;
  out.features = data.features;
  out.train = to_examples(data.train, out.words, out.answers, model.max_question_length);
  out.val = to_examples(data.val, out.words, out.answers, model.max_question_length);
  return out;
}

TrainingData load_training_data(const TrainConfig& config) {
  if (config.paths.train.empty()) return from_synthetic(make_synthetic(config.synthetic), config.model);

  TrainingData out;
  LoadedWordVectors vectors = load_word_vectors(required(config.paths.vectors, "vectors"), config.model.finetune_embeddings);
  out.words = std::move(vectors.vocabulary);
  out.table = std::move(vectors.table);
  const std::vector<DatasetRecord> train_records = read_records(config.paths.train);
  out.answers = config.paths.answers.empty() ? build_answer_vocabulary(train_records)
                                             : load_answer_vocabulary(config.paths.answers);
  out.features = load_features(required(config.paths.features, "features"),
                               required(config.paths.feature_index, "feature_index"));
  const std::size_t max_len = config.model.max_question_length;
  out.train = to_examples(train_records, out.words, out.answers, max_len);
  out.val = load_dataset(required(config.paths.val, "val"), out.words, out.answers, max_len);
  return out;
}

void check_dimensions(const ModelConfig& model, const TrainingData& data) {
  auto mismatch = [](const char* what, std::size_t config, std::size_t found) {
    throw DataError(std::string(what) + ": config says " + std::to_string(config) + ", data has " +
                    std::to_string(found));
  };
  if (data.table.width() != model.embed_dim) mismatch("model.embed_dim", model.embed_dim, data.table.width());
  if (data.features.width() != model.feature_dim) mismatch("model.feature_dim", model.feature_dim, data.features.width());
  if (data.features.regions() != model.regions) mismatch("model.regions", model.regions, data.features.regions());
  if (data.answers.size() != model.num_answers) mismatch("model.num_answers", model.num_answers, data.answers.size());
  for (const auto* split : {&data.train, &data.val}) {
    for (const VqaExample& ex : *split) {
      if (!data.features.contains(ex.image_id)) {
        throw DataError("example " + ex.id + " refers to missing image " + ex.image_id);
      }
      if (ex.question.indices.size() != model.max_question_length) {
        mismatch("model.max_question_length", model.max_question_length, ex.question.indices.size());
      }
    }
  }
}

EvalResult evaluate(const ModelConfig& model, const ParamStore& params, const std::vector<VqaExample>& examples,
                    const FeatureStore& features, const AnswerVocabulary& answers, std::size_t batch_size) {
  if (examples.empty()) throw DataError("cannot evaluate on an empty dataset");
  if (answers.size() != model.num_answers) {
    throw DataError("answer vocabulary has " + std::to_string(answers.size()) + " entries, model expects " +
                    std::to_string(model.num_answers));
  }
  if (features.regions() != model.regions || features.width() != model.feature_dim) {
    throw DataError("features are " + std::to_string(features.regions()) + "x" + std::to_string(features.width()) +
                    ", model expects " + std::to_string(model.regions) + "x" + std::to_string(model.feature_dim));
  }
  EvalResult result;
  double total = 0.0;
  for (const auto& batch : batch_iter(examples.size(), batch_size, false, 0, 0)) {
    const ModelInput input = make_input(examples, batch, features, model.num_answers);
    const ForwardResult out = forward(model, params, input, Mode::kEval);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const VqaExample& ex = examples[batch[b]];
      const double score = ex.score_for(out.predicted[b]);
      total += score;
      result.predictions.push_back({ex.id, answers.answer(out.predicted[b]), score});
    }
  }
  result.accuracy = total / static_cast<double>(examples.size());
  return result;
}

std::string predictions_csv(const EvalResult& result) {
  std::string out = "id,predicted,score\n";
  for (const ExamplePrediction& p : result.predictions) out += p.id + "," + p.predicted + "," + format_double(p.score) + "\n";
  return out;
}

TrainResult train_model(const TrainConfig& config, const TrainingData& data) {
  config.validate();
  check_dimensions(config.model, data);
  if (data.train.empty()) throw DataError("training set is empty");
  if (data.val.empty()) throw DataError("validation set is empty");

  const auto start = std::chrono::steady_clock::now();
  ModelParams params = init_model(config.model, data.table, config.seed);
  AdamaxState state;
  std::mt19937_64 dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  TrainResult result;
  result.record.config_text = dump_config(config);
  result.record.seed = config.seed;
  result.best_params = params.store;
  std::size_t stale = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double loss_sum = 0.0;
    const auto batches = batch_iter(data.train.size(), config.batch_size, true, config.seed, epoch);
    std::size_t bi = 0;
    EpochMetrics m;
    try {
      for (; bi < batches.size(); ++bi) {
        const ModelInput input = make_input(data.train, batches[bi], data.features, config.model.num_answers);
        ad::Graph graph(&params.store);
        const ModelVars vars = build_model(graph, config.model, input, Mode::kTrain, &dropout_rng);
        const double loss = vars.loss->value().item();
        if (!std::isfinite(loss)) throw NumericError("loss became " + format_double(loss));
        loss_sum += loss * static_cast<double>(batches[bi].size());
        graph.backward(*vars.loss);
        Gradients grads = graph.parameter_gradients();
        mask_frozen_gradients(grads, params);
        adamax_step(params.store, grads, state, config.optimizer);
      }
      m.epoch = epoch;
      m.train_loss = loss_sum / static_cast<double>(data.train.size());
      m.train_acc = evaluate(config.model, params.store, data.train, data.features, data.answers).accuracy;
      m.val_acc = evaluate(config.model, params.store, data.val, data.features, data.answers).accuracy;
    } catch (const NumericError& e) {
      const std::string where = bi < batches.size() ? ", batch " + std::to_string(bi) : " (evaluation)";
      result.record.failed = true;
      result.record.failure = std::string(e.what()) + " at epoch " + std::to_string(epoch) + where +
                              "; parameter norms:\n" + parameter_norms(params.store);
      break;
    }

    result.record.epochs.push_back(m);

    if (m.val_acc > result.record.best_val_acc) {
      result.record.best_val_acc = m.val_acc;
      result.record.best_epoch = epoch;
      result.best_params = params.store;
      stale = 0;
    } else if (config.patience > 0 && ++stale >= config.patience) {
      break;
    }
  }
  result.record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::string metrics_csv(const RunRecord& record) {
  std::string out = "epoch,train_loss,train_acc,val_acc\n";
  for (const EpochMetrics& m : record.epochs) {
    out += std::to_string(m.epoch) + "," + format_double(m.train_loss) + "," + format_double(m.train_acc) + "," +
           format_double(m.val_acc) + "\n";
  }
  return out;
}

nlohmann::json run_json(const RunRecord& record) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const EpochMetrics& m : record.epochs) {
    epochs.push_back({{"epoch", m.epoch}, {"train_loss", m.train_loss}, {"train_acc", m.train_acc}, {"val_acc", m.val_acc}});
  }
  nlohmann::json j = {{"seed", record.seed},
                      {"config", nlohmann::json::parse(record.config_text)},
                      {"epochs", epochs},
                      {"best_epoch", record.best_epoch},
                      {"wall_seconds", record.wall_seconds},
                      {"failed", record.failed}};
  // JSON has no infinity; a run with no finished epoch has no best value.
  j["best_val_acc"] = record.epochs.empty() ? nlohmann::json(nullptr) : nlohmann::json(record.best_val_acc);
  if (record.failed) j["failure"] = record.failure;
  return j;
}

RunRecord train(const TrainConfig& config) {
  const TrainingData data = load_training_data(config);
  const TrainResult result = train_model(config, data);
  const std::filesystem::path dir = config.paths.out_dir;
  std::filesystem::create_directories(dir);
  io::write_file(dir / "metrics.csv", metrics_csv(result.record));
  io::write_file(dir / "run.json", run_json(result.record).dump(2) + "\n");
  if (result.record.failed) throw TrainingDiverged(result.record.failure);
  // Where the run was written is not part of the model; leaving it out keeps
  // checkpoints of identical runs byte-identical wherever they land.
  TrainConfig stored = config;
  stored.paths.out_dir.clear();
  save_checkpoint(dir / "checkpoint.bin", Checkpoint{dump_config(stored), result.best_params});
  return result.record;
}

TrainConfig checkpoint_config(const Checkpoint& checkpoint) {
  TrainConfig config = parse_config(checkpoint.config_text);
  for (const std::string& name : checkpoint.params.names()) {
    if (!checkpoint.params.get(name).all_finite()) {
      throw NumericError("checkpoint parameter " + name + " is not finite");
    }
  }
  return config;
}

}  // namespace vqa
