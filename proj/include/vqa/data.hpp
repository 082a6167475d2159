#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vqa/encoders.hpp"
#include "vqa/model.hpp"
#include "vqa/tensor.hpp"

namespace vqa {

// ---------------------------------------------------------------------------
// Image features

// Per-image region features, all [regions x width].
class FeatureStore {
 public:
  FeatureStore(std::size_t regions, std::size_t width) : regions_(regions), width_(width) {}

  // Appends a record and maps `id` to its ordinal.
  void add(const std::string& id, Tensor features);
  // Maps another id onto an existing record.
  void alias(const std::string& id, std::size_t ordinal);

  const Tensor& get(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.contains(id); }

  std::size_t regions() const noexcept { return regions_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t count() const noexcept { return records_.size(); }
  const std::vector<Tensor>& records() const noexcept { return records_; }
  const std::map<std::string, std::size_t>& index() const noexcept { return index_; }

 private:
  std::size_t regions_;
  std::size_t width_;
  std::vector<Tensor> records_;
  std::map<std::string, std::size_t> index_;
};

// "VQAF" | u32 version | u32 count | u32 K | u32 Dv | count * K * Dv f32,
// all little-endian. The index is text, one "id ordinal" pair per line.
inline constexpr std::uint32_t kFeatureFormatVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 20;

std::string encode_features(const FeatureStore& store);
std::string encode_feature_index(const FeatureStore& store);
FeatureStore decode_features(std::string_view binary, std::string_view index_text, const std::string& source = "features");

void write_features(const std::filesystem::path& binary, const std::filesystem::path& index, const FeatureStore& store);
FeatureStore load_features(const std::filesystem::path& binary, const std::filesystem::path& index);

// ---------------------------------------------------------------------------
// Answers and examples

class AnswerVocabulary {
 public:
  std::size_t add(const std::string& answer);
  std::optional<std::size_t> find(const std::string& answer) const;
  const std::string& answer(std::size_t index) const { return answers_.at(index); }
  std::size_t size() const noexcept { return answers_.size(); }
  const std::vector<std::string>& answers() const noexcept { return answers_; }

 private:
  std::vector<std::string> answers_;
  std::map<std::string, std::size_t> index_;
};

// One line of a dataset file.
struct DatasetRecord {
  std::string id;
  std::string question;
  std::string image_id;
  std::vector<std::pair<std::string, double>> answers;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

struct VqaExample {
  std::string id;
  std::string image_id;
  PaddedQuestion question;
  std::vector<std::pair<std::size_t, double>> targets;  // answer index -> soft score

  double score_for(std::size_t answer) const;
};

// Frequency-descending, ties lexicographic. `extra` answers not seen in the
// records are appended with frequency zero under the same ordering.
AnswerVocabulary build_answer_vocabulary(const std::vector<DatasetRecord>& records,
                                         const std::vector<std::string>& extra = {});
AnswerVocabulary load_answer_vocabulary(const std::filesystem::path& path);
void write_answer_vocabulary(const std::filesystem::path& path, const AnswerVocabulary& answers);

// Line-delimited JSON records {"id"?, "question", "image_id", "answers": {answer: score}}.
std::vector<DatasetRecord> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path, const std::vector<DatasetRecord>& records);

// Tokenizes and pads questions, maps answers; unknown answers are dropped
// with a warning.
std::vector<VqaExample> to_examples(const std::vector<DatasetRecord>& records, const Vocabulary& words,
                                    const AnswerVocabulary& answers, std::size_t max_len = kDefaultMaxQuestionLength);
std::vector<VqaExample> load_dataset(const std::filesystem::path& path, const Vocabulary& words,
                                     const AnswerVocabulary& answers, std::size_t max_len = kDefaultMaxQuestionLength);

// Gathers the listed examples into model layout.
ModelInput make_input(const std::vector<VqaExample>& examples, std::span<const std::size_t> which,
                      const FeatureStore& features, std::size_t num_answers);

// Every index exactly once; the last batch may be short. With shuffling the
// order depends only on (seed, epoch).
std::vector<std::vector<std::size_t>> batch_iter(std::size_t count, std::size_t batch_size, bool shuffle,
                                                 std::uint64_t seed, std::uint64_t epoch);

// ---------------------------------------------------------------------------
// Synthetic needle tasks

enum class SyntheticTask { kSingle, kDual };

std::string_view to_string(SyntheticTask task);
SyntheticTask parse_synthetic_task(std::string_view name);

struct SyntheticSpec {
  SyntheticTask task = SyntheticTask::kSingle;
  std::uint64_t seed = 1;
  std::size_t n = 2500;  // total; 80% train, 20% validation
  std::size_t regions = 6;
  std::size_t feature_width = 16;
  std::size_t classes = 8;
  std::size_t embed_dim = 16;

  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

// Ground truth kept beside each generated record.
struct NeedleTruth {
  std::vector<std::size_t> marked_rows;  // one (single) or two (dual) rows
  std::vector<std::size_t> classes;      // class at each marked row
  std::vector<std::size_t> keys;         // key asked about for each marked row
};

struct SyntheticData {
  SyntheticSpec spec;
  std::vector<DatasetRecord> train;
  std::vector<DatasetRecord> val;
  std::vector<NeedleTruth> train_truth;
  std::vector<NeedleTruth> val_truth;
  FeatureStore features{0, 0};
  Vocabulary words;
  Tensor word_vectors;  // [V x D], PAD and UNK rows zero
  AnswerVocabulary answers;
};

SyntheticData make_synthetic_single(const SyntheticSpec& spec);
SyntheticData make_synthetic_dual(const SyntheticSpec& spec);
SyntheticData make_synthetic(const SyntheticSpec& spec);

// Class recovered from one feature row by reading the class block.
std::size_t decode_row_class(const Tensor& features, std::size_t row, const SyntheticSpec& spec);

// Accuracy of an oracle that reads all marked rows of each example.
double marked_row_oracle_accuracy(const SyntheticData& data, const std::vector<DatasetRecord>& records,
                                  const std::vector<NeedleTruth>& truth);
// Best constant answer per question key, scored in-sample.
double question_only_bayes_rate(const std::vector<DatasetRecord>& records, const std::vector<NeedleTruth>& truth);
// Dual task: best answer given only the first marked row's class, in-sample.
double single_row_bayes_rate(const SyntheticData& data, const std::vector<DatasetRecord>& records,
                             const std::vector<NeedleTruth>& truth);

// Writes vectors.txt, answers.txt, train.jsonl, val.jsonl, features.bin and
// features.idx into `dir`.
void write_synthetic(const std::filesystem::path& dir, const SyntheticData& data);

}  // namespace vqa
