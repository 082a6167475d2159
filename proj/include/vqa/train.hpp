#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "vqa/checkpoint.hpp"
#include "vqa/config.hpp"
#include "vqa/data.hpp"
#include "vqa/errors.hpp"

namespace vqa {

// Everything a run reads: vocabulary, embeddings, answers, features, splits.
struct TrainingData {
  Vocabulary words;
  EmbeddingTable table;
  AnswerVocabulary answers;
  FeatureStore features{0, 0};
  std::vector<VqaExample> train;
  std::vector<VqaExample> val;
};

// Reads the files named in config.paths. When paths.train is empty the
// synthetic task described by config.synthetic is generated instead.
TrainingData load_training_data(const TrainConfig& config);
TrainingData from_synthetic(const SyntheticData& data, const ModelConfig& model);

// DataError naming the first field that disagrees with the model config.
void check_dimensions(const ModelConfig& model, const TrainingData& data);

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

struct RunRecord {
  std::string config_text;
  std::uint64_t seed = 0;
  std::vector<EpochMetrics> epochs;
  double best_val_acc = -std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  double wall_seconds = 0.0;
  bool failed = false;
  std::string failure;
};

// Raised when the loss goes non-finite; the message carries epoch, batch
// and parameter norms.
class TrainingDiverged : public NumericError {
 public:
  using NumericError::NumericError;
};

struct TrainResult {
  RunRecord record;
  ParamStore best_params;
};

TrainResult train_model(const TrainConfig& config, const TrainingData& data);

std::string metrics_csv(const RunRecord& record);
nlohmann::json run_json(const RunRecord& record);

// Full command: loads data, trains, writes metrics.csv, checkpoint.bin and
// run.json into config.paths.out_dir.
RunRecord train(const TrainConfig& config);

struct ExamplePrediction {
  std::string id;
  std::string predicted;
  double score = 0.0;
};

struct EvalResult {
  double accuracy = 0.0;
  std::vector<ExamplePrediction> predictions;
};

// Eval-mode forward over every example. Empty input is a DataError.
EvalResult evaluate(const ModelConfig& model, const ParamStore& params, const std::vector<VqaExample>& examples,
                    const FeatureStore& features, const AnswerVocabulary& answers, std::size_t batch_size = 256);

// "id,predicted,score" with a header row.
std::string predictions_csv(const EvalResult& result);

// Config stored in a checkpoint, checked against the data it is used with.
TrainConfig checkpoint_config(const Checkpoint& checkpoint);

}  // namespace vqa
