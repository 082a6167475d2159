#include "vqa/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "vqa/binary_io.hpp"
#include "vqa/errors.hpp"
#include "vqa/log.hpp"

namespace vqa {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// FeatureStore

void FeatureStore::add(const std::string& id, Tensor features) {
  if (features.shape() != Shape{regions_, width_}) {
    throw ShapeError("feature record " + id + " has shape " + to_string(features.shape()) + ", store holds [" +
                     std::to_string(regions_) + "x" + std::to_string(width_) + "]");
  }
  if (index_.contains(id)) throw DataError("duplicate image id " + id);
  records_.push_back(std::move(features));
  index_.emplace(id, records_.size() - 1);
}

void FeatureStore::alias(const std::string& id, std::size_t ordinal) {
  if (ordinal >= records_.size()) {
    throw FormatError(FormatFault::kOrdinalOutOfRange,
                      "image id " + id + " refers to record " + std::to_string(ordinal) + " of " + std::to_string(records_.size()));
  }
  if (index_.contains(id)) throw DataError("duplicate image id " + id);
  index_.emplace(id, ordinal);
}

const Tensor& FeatureStore::get(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw DataError("no features for image id " + id);
  return records_[it->second];
}

std::string encode_features(const FeatureStore& store) {
  io::ByteWriter out;
  out.bytes("VQAF");
  out.u32(kFeatureFormatVersion);
  out.u32(static_cast<std::uint32_t>(store.count()));
  out.u32(static_cast<std::uint32_t>(store.regions()));
  out.u32(static_cast<std::uint32_t>(store.width()));
  for (const Tensor& record : store.records()) {
    for (double v : record.data()) out.f32(static_cast<float>(v));
  }
  return out.take();
}

std::string encode_feature_index(const FeatureStore& store) {
  std::vector<std::pair<std::size_t, std::string>> rows;
  for (const auto& [id, ordinal] : store.index()) rows.emplace_back(ordinal, id);
  std::sort(rows.begin(), rows.end());
  std::string out;
  for (const auto& [ordinal, id] : rows) out += id + " " + std::to_string(ordinal) + "\n";
  return out;
}

FeatureStore decode_features(std::string_view binary, std::string_view index_text, const std::string& source) {
  io::ByteReader in(binary, source);
  if (in.remaining() < 4 || in.bytes(4) != "VQAF") {
    throw FormatError(FormatFault::kBadMagic, source + ": bad magic, not a VQAF feature file");
  }
  const std::uint32_t version = in.u32();
  if (version != kFeatureFormatVersion) {
    throw FormatError(FormatFault::kUnsupportedVersion, source + ": unsupported VQAF version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32();
  const std::uint32_t regions = in.u32();
  const std::uint32_t width = in.u32();
  const std::uint64_t expected = std::uint64_t{count} * regions * width * 4;
  if (in.remaining() < expected) {
    throw FormatError(FormatFault::kTruncated, source + ": truncated, expected " + std::to_string(expected) +
                                                   " payload bytes, found " + std::to_string(in.remaining()));
  }
  if (in.remaining() > expected) {
    throw FormatError(FormatFault::kMalformedRecord, source + ": " + std::to_string(in.remaining() - expected) +
                                                         " trailing bytes after the last record");
  }
  std::vector<Tensor> records;
  records.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    Tensor t(Shape{regions, width});
    for (double& v : t.data()) v = static_cast<double>(in.f32());
    records.push_back(std::move(t));
  }

  FeatureStore store(regions, width);
  std::vector<std::pair<std::string, std::size_t>> entries;
  std::istringstream lines{std::string(index_text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string id;
    long long ordinal = -1;
    if (!(fields >> id)) continue;
    if (!(fields >> ordinal) || ordinal < 0) {
      throw FormatError(FormatFault::kMalformedRecord, source + " index line " + std::to_string(line_no) + ": expected 'id ordinal'");
    }
    if (static_cast<std::uint64_t>(ordinal) >= count) {
      throw FormatError(FormatFault::kOrdinalOutOfRange, source + " index line " + std::to_string(line_no) + ": ordinal " +
                                                             std::to_string(ordinal) + " but file holds " +
                                                             std::to_string(count) + " records");
    }
    entries.emplace_back(id, static_cast<std::size_t>(ordinal));
  }
  // Records go in by ordinal under their first listed id; further ids for the
  // same record become aliases.
  std::vector<std::string> first_id(count);
  for (const auto& [id, ordinal] : entries) {
    if (first_id[ordinal].empty()) first_id[ordinal] = id;
  }
  for (std::size_t r = 0; r < count; ++r) {
    store.add(first_id[r].empty() ? "#" + std::to_string(r) : first_id[r], std::move(records[r]));
  }
  for (const auto& [id, ordinal] : entries) {
    if (!store.contains(id)) store.alias(id, ordinal);
  }
  return store;
}

void write_features(const std::filesystem::path& binary, const std::filesystem::path& index, const FeatureStore& store) {
  io::write_file(binary, encode_features(store));
  io::write_file(index, encode_feature_index(store));
}

FeatureStore load_features(const std::filesystem::path& binary, const std::filesystem::path& index) {
  return decode_features(io::read_file(binary), io::read_file(index), binary.string());
}

// ---------------------------------------------------------------------------
// Answers

std::size_t AnswerVocabulary::add(const std::string& answer) {
  auto it = index_.find(answer);
  if (it != index_.end()) return it->second;
  answers_.push_back(answer);
  index_.emplace(answer, answers_.size() - 1);
  return answers_.size() - 1;
}

std::optional<std::size_t> AnswerVocabulary::find(const std::string& answer) const {
  auto it = index_.find(answer);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

AnswerVocabulary build_answer_vocabulary(const std::vector<DatasetRecord>& records, const std::vector<std::string>& extra) {
  std::map<std::string, std::size_t> frequency;
  for (const std::string& answer : extra) frequency.try_emplace(answer, 0);
  for (const DatasetRecord& record : records) {
    for (const auto& [answer, score] : record.answers) ++frequency[answer];
  }
  std::vector<std::pair<std::string, std::size_t>> ordered(frequency.begin(), frequency.end());
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  AnswerVocabulary vocab;
  for (const auto& [answer, count] : ordered) vocab.add(answer);
  return vocab;
}

AnswerVocabulary load_answer_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open answer vocabulary " + path.string());
  AnswerVocabulary vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      throw FormatError(FormatFault::kMalformedRecord, path.string() + ":" + std::to_string(line_no) + ": empty answer");
    }
    if (vocab.find(line)) {
      throw FormatError(FormatFault::kMalformedRecord, path.string() + ":" + std::to_string(line_no) + ": duplicate answer " + line);
    }
    vocab.add(line);
  }
  return vocab;
}

void write_answer_vocabulary(const std::filesystem::path& path, const AnswerVocabulary& answers) {
  std::string out;
  for (const std::string& a : answers.answers()) out += a + "\n";
  io::write_file(path, out);
}

// ---------------------------------------------------------------------------
// Dataset records

double VqaExample::score_for(std::size_t answer) const {
  for (const auto& [index, score] : targets) {
    if (index == answer) return score;
  }
  return 0.0;
}

namespace {

const ordered_json& required(const ordered_json& object, const char* field, const std::string& where) {
  auto it = object.find(field);
  if (it == object.end()) {
    throw FormatError(FormatFault::kMissingField, where + ": missing field '" + field + "'");
  }
  return *it;
}

}  // namespace

std::vector<DatasetRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  std::vector<DatasetRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + " line " + std::to_string(line_no);
    // Ordered so answers keep their file order.
    ordered_json object;
    try {
      object = ordered_json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(FormatFault::kMalformedRecord, where + ": malformed record: " + e.what());
    }
    if (!object.is_object()) throw FormatError(FormatFault::kMalformedRecord, where + ": record is not an object");
    DatasetRecord record;
    try {
      record.question = required(object, "question", where).get<std::string>();
      record.image_id = required(object, "image_id", where).get<std::string>();
      const ordered_json& answers = required(object, "answers", where);
      if (!answers.is_object()) throw FormatError(FormatFault::kMalformedRecord, where + ": answers must be an object");
      for (const auto& [answer, score] : answers.items()) record.answers.emplace_back(answer, score.get<double>());
      record.id = object.contains("id") ? object["id"].get<std::string>() : std::to_string(records.size());
    } catch (const json::type_error& e) {
      throw FormatError(FormatFault::kMalformedRecord, where + ": wrong field type: " + e.what());
    }
    records.push_back(std::move(record));
  }
  if (records.empty()) warn("dataset " + path.string() + " is empty");
  return records;
}

void write_records(const std::filesystem::path& path, const std::vector<DatasetRecord>& records) {
  std::string out;
  for (const DatasetRecord& r : records) {
    ordered_json answers = ordered_json::object();
    for (const auto& [answer, score] : r.answers) answers[answer] = score;
    ordered_json object = {{"id", r.id}, {"question", r.question}, {"image_id", r.image_id}, {"answers", answers}};
    out += object.dump() + "\n";
  }
  io::write_file(path, out);
}

std::vector<VqaExample> to_examples(const std::vector<DatasetRecord>& records, const Vocabulary& words,
                                    const AnswerVocabulary& answers, std::size_t max_len) {
  std::vector<VqaExample> out;
  out.reserve(records.size());
  for (const DatasetRecord& record : records) {
    VqaExample example{record.id, record.image_id, pad_trim(words, tokenize(record.question), max_len), {}};
    for (const auto& [answer, score] : record.answers) {
      if (!(score >= 0.0 && score <= 1.0)) {
        throw DataError("record " + record.id + ": score " + std::to_string(score) + " for '" + answer + "' outside [0,1]");
      }
      const auto index = answers.find(answer);
      if (!index) {
        warn("record " + record.id + ": answer '" + answer + "' not in the answer vocabulary, dropped");
        continue;
      }
      example.targets.emplace_back(*index, score);
    }
    std::sort(example.targets.begin(), example.targets.end());
    out.push_back(std::move(example));
  }
  return out;
}

std::vector<VqaExample> load_dataset(const std::filesystem::path& path, const Vocabulary& words,
                                     const AnswerVocabulary& answers, std::size_t max_len) {
  return to_examples(read_records(path), words, answers, max_len);
}

ModelInput make_input(const std::vector<VqaExample>& examples, std::span<const std::size_t> which,
                      const FeatureStore& features, std::size_t num_answers) {
  ModelInput input;
  const std::size_t k = features.regions(), width = features.width();
  input.features = Tensor(Shape{which.size() * k, width});
  input.targets = Tensor(Shape{which.size(), num_answers});
  for (std::size_t b = 0; b < which.size(); ++b) {
    const VqaExample& ex = examples.at(which[b]);
    input.questions.push_back(&ex.question);
    const Tensor& f = features.get(ex.image_id);
    std::copy(f.data().begin(), f.data().end(), input.features.data().begin() + b * k * width);
    for (const auto& [answer, score] : ex.targets) {
      if (answer >= num_answers) throw DataError("example " + ex.id + " refers to answer index " + std::to_string(answer));
      input.targets.at(b, answer) = score;
    }
  }
  return input;
}

std::vector<std::vector<std::size_t>> batch_iter(std::size_t count, std::size_t batch_size, bool shuffle,
                                                 std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  if (shuffle) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32), 0x5eedu};
    std::mt19937_64 rng(seq);
    for (std::size_t i = count; i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t end = std::min(count, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

// ---------------------------------------------------------------------------
// Synthetic needle tasks
//
// Feature columns: [0, K) hold a one-hot key per row (scaled), [K, K + C) a
// one-hot class per row (scaled); every cell also carries U(-1,1) noise.
// Keys are a random permutation of 0..K-1 within each image, so the question's
// key picks out exactly one row. Every row carries some class, which makes
// mean pooling useless: the answer is the class at the asked-about row(s).

namespace {

constexpr double kPatternScale = 3.0;
constexpr double kSoftScore = 0.3;
constexpr double kSoftProbability = 0.25;

std::string class_answer(std::size_t c) { return "c" + std::to_string(c); }

std::string pair_answer(std::size_t a, std::size_t b) {
  if (a > b) std::swap(a, b);
  return "c" + std::to_string(a) + "+c" + std::to_string(b);
}

std::string key_token(std::size_t k) { return "key" + std::to_string(k); }

const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words{"what", "is", "at", "the", "class", "of", "and", "are", "classes", "holds"};
  return words;
}

void validate_spec(const SyntheticSpec& spec, std::size_t min_regions) {
  if (spec.regions < min_regions) {
    throw ConfigError("synthetic task needs at least " + std::to_string(min_regions) + " regions, got " +
                      std::to_string(spec.regions));
  }
  if (spec.classes < 2) throw ConfigError("synthetic task needs at least 2 classes");
  if (spec.feature_width < spec.regions + spec.classes) {
    throw ConfigError("feature width " + std::to_string(spec.feature_width) + " too small for " +
                      std::to_string(spec.regions) + " keys and " + std::to_string(spec.classes) + " classes");
  }
  if (spec.n < 2) throw ConfigError("synthetic task needs at least 2 examples");
  if (spec.embed_dim < 1) throw ConfigError("embedding width must be at least 1");
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

struct ImageLayout {
  Tensor features;
  std::vector<std::size_t> keys;     // key of each row
  std::vector<std::size_t> classes;  // class of each row
};

ImageLayout make_image(const SyntheticSpec& spec, std::mt19937_64& rng) {
  const std::size_t k = spec.regions, width = spec.feature_width;
  ImageLayout image{Tensor(Shape{k, width}), std::vector<std::size_t>(k), std::vector<std::size_t>(k)};
  std::uniform_real_distribution<double> noise(-1.0, 1.0);
  for (double& v : image.features.data()) v = noise(rng);
  for (std::size_t r = 0; r < k; ++r) image.keys[r] = r;
  for (std::size_t i = k; i > 1; --i) std::swap(image.keys[i - 1], image.keys[uniform_index(rng, i)]);
  for (std::size_t r = 0; r < k; ++r) {
    image.classes[r] = uniform_index(rng, spec.classes);
    image.features.at(r, image.keys[r]) += kPatternScale;
    image.features.at(r, k + image.classes[r]) += kPatternScale;
  }
  // Stored as f32 on disk; keep the in-memory copy identical to what a reload sees.
  for (double& v : image.features.data()) v = static_cast<double>(static_cast<float>(v));
  return image;
}

SyntheticData start_dataset(const SyntheticSpec& spec, std::mt19937_64& rng) {
  SyntheticData data;
  data.spec = spec;
  data.features = FeatureStore(spec.regions, spec.feature_width);
  for (const std::string& w : filler_words()) data.words.add(w);
  for (std::size_t k = 0; k < spec.regions; ++k) data.words.add(key_token(k));
  data.word_vectors = Tensor(Shape{data.words.size(), spec.embed_dim});
  std::normal_distribution<double> gaussian(0.0, 1.0);
  for (std::size_t r = 2; r < data.words.size(); ++r) {
    for (std::size_t c = 0; c < spec.embed_dim; ++c) data.word_vectors.at(r, c) = gaussian(rng);
  }
  return data;
}

void place(SyntheticData& data, std::size_t i, DatasetRecord record, NeedleTruth truth) {
  const std::size_t n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(data.spec.n)));
  if (i < n_train) {
    data.train.push_back(std::move(record));
    data.train_truth.push_back(std::move(truth));
  } else {
    data.val.push_back(std::move(record));
    data.val_truth.push_back(std::move(truth));
  }
}

void self_validate(const SyntheticData& data) {
  for (const auto& [records, truth] : {std::pair{&data.train, &data.train_truth}, std::pair{&data.val, &data.val_truth}}) {
    if (records->empty()) continue;
    const double oracle = marked_row_oracle_accuracy(data, *records, *truth);
    if (oracle != 1.0) throw NumericError("synthetic generator: marked-row oracle scored " + std::to_string(oracle));
  }
  if (data.spec.task == SyntheticTask::kDual && single_row_bayes_rate(data, data.train, data.train_truth) >= 1.0) {
    throw ConfigError("synthetic dual task too small: one marked row already determines every answer");
  }
}

}  // namespace

std::string_view to_string(SyntheticTask task) { return task == SyntheticTask::kSingle ? "single" : "dual"; }

SyntheticTask parse_synthetic_task(std::string_view name) {
  if (name == "single") return SyntheticTask::kSingle;
  if (name == "dual") return SyntheticTask::kDual;
  throw ConfigError("unknown synthetic task '" + std::string(name) + "'");
}

SyntheticData make_synthetic_single(const SyntheticSpec& spec) {
  validate_spec(spec, 2);
  std::mt19937_64 rng(spec.seed);
  SyntheticData data = start_dataset(spec, rng);
  std::bernoulli_distribution soft(kSoftProbability);
  for (std::size_t i = 0; i < spec.n; ++i) {
    ImageLayout image = make_image(spec, rng);
    const std::size_t row = uniform_index(rng, spec.regions);
    const std::size_t key = image.keys[row], cls = image.classes[row];
    static const char* kTemplates[] = {"What is at {}?", "What is the class of {}?", "{} holds what?"};
    std::string question = kTemplates[uniform_index(rng, 3)];
    question.replace(question.find("{}"), 2, key_token(key));

    DatasetRecord record{"q" + std::to_string(i), question, "img" + std::to_string(i), {{class_answer(cls), 1.0}}};
    if (soft(rng)) record.answers.emplace_back(class_answer((cls + 1) % spec.classes), kSoftScore);
    data.features.add(record.image_id, std::move(image.features));
    place(data, i, std::move(record), NeedleTruth{{row}, {cls}, {key}});
  }
  std::vector<std::string> all;
  for (std::size_t c = 0; c < spec.classes; ++c) all.push_back(class_answer(c));
  data.answers = build_answer_vocabulary(data.train, all);
  self_validate(data);
  return data;
}

SyntheticData make_synthetic_dual(const SyntheticSpec& spec) {
  validate_spec(spec, 3);
  std::mt19937_64 rng(spec.seed);
  SyntheticData data = start_dataset(spec, rng);
  std::bernoulli_distribution soft(kSoftProbability);
  for (std::size_t i = 0; i < spec.n; ++i) {
    ImageLayout image = make_image(spec, rng);
    const std::size_t first = uniform_index(rng, spec.regions);
    std::size_t second = uniform_index(rng, spec.regions - 1);
    if (second >= first) ++second;
    const std::size_t c1 = image.classes[first], c2 = image.classes[second];
    const std::size_t k1 = image.keys[first], k2 = image.keys[second];
    static const char* kTemplates[] = {"What is at {} and {}?", "What are the classes of {} and {}?"};
    std::string question = kTemplates[uniform_index(rng, 2)];
    question.replace(question.find("{}"), 2, key_token(k1));
    question.replace(question.find("{}"), 2, key_token(k2));

    DatasetRecord record{"q" + std::to_string(i), question, "img" + std::to_string(i), {{pair_answer(c1, c2), 1.0}}};
    if (soft(rng)) {
      const std::string near = pair_answer(c1, (c2 + 1) % spec.classes);
      if (near != record.answers.front().first) record.answers.emplace_back(near, kSoftScore);
    }
    data.features.add(record.image_id, std::move(image.features));
    place(data, i, std::move(record), NeedleTruth{{first, second}, {c1, c2}, {k1, k2}});
  }
  std::vector<std::string> all;
  for (std::size_t a = 0; a < spec.classes; ++a) {
    for (std::size_t b = a; b < spec.classes; ++b) all.push_back(pair_answer(a, b));
  }
  data.answers = build_answer_vocabulary(data.train, all);
  self_validate(data);
  return data;
}

SyntheticData make_synthetic(const SyntheticSpec& spec) {
  return spec.task == SyntheticTask::kSingle ? make_synthetic_single(spec) : make_synthetic_dual(spec);
}

std::size_t decode_row_class(const Tensor& features, std::size_t row, const SyntheticSpec& spec) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < spec.classes; ++c) {
    if (features.at(row, spec.regions + c) > features.at(row, spec.regions + best)) best = c;
  }
  return best;
}

namespace {

double score_of(const DatasetRecord& record, const std::string& answer) {
  for (const auto& [a, s] : record.answers) {
    if (a == answer) return s;
  }
  return 0.0;
}

// Sum over groups of the best total score any single answer achieves.
template <typename KeyFn>
double grouped_bayes_rate(const std::vector<DatasetRecord>& records, KeyFn key_of) {
  if (records.empty()) return 0.0;
  std::map<std::vector<std::size_t>, std::map<std::string, double>> totals;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& group = totals[key_of(i)];
    for (const auto& [answer, score] : records[i].answers) group[answer] += score;
  }
  double best_total = 0.0;
  for (const auto& [key, answers] : totals) {
    double best = 0.0;
    for (const auto& [answer, total] : answers) best = std::max(best, total);
    best_total += best;
  }
  return best_total / static_cast<double>(records.size());
}

}  // namespace

double marked_row_oracle_accuracy(const SyntheticData& data, const std::vector<DatasetRecord>& records,
                                  const std::vector<NeedleTruth>& truth) {
  if (records.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Tensor& features = data.features.get(records[i].image_id);
    std::string answer;
    if (truth[i].marked_rows.size() == 1) {
      answer = class_answer(decode_row_class(features, truth[i].marked_rows[0], data.spec));
    } else {
      answer = pair_answer(decode_row_class(features, truth[i].marked_rows[0], data.spec),
                           decode_row_class(features, truth[i].marked_rows[1], data.spec));
    }
    total += score_of(records[i], answer);
  }
  return total / static_cast<double>(records.size());
}

double question_only_bayes_rate(const std::vector<DatasetRecord>& records, const std::vector<NeedleTruth>& truth) {
  return grouped_bayes_rate(records, [&truth](std::size_t i) { return truth[i].keys; });
}

double single_row_bayes_rate(const SyntheticData& data, const std::vector<DatasetRecord>& records,
                             const std::vector<NeedleTruth>& truth) {
  return grouped_bayes_rate(records, [&](std::size_t i) {
    const Tensor& features = data.features.get(records[i].image_id);
    return std::vector<std::size_t>{decode_row_class(features, truth[i].marked_rows[0], data.spec)};
  });
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticData& data) {
  std::filesystem::create_directories(dir);
  write_word_vectors(dir / "vectors.txt", data.words, data.word_vectors);
  write_answer_vocabulary(dir / "answers.txt", data.answers);
  write_records(dir / "train.jsonl", data.train);
  write_records(dir / "val.jsonl", data.val);
  write_features(dir / "features.bin", dir / "features.idx", data.features);
}

}  // namespace vqa
