#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "helpers.hpp"
#include "vqa/binary_io.hpp"
#include "vqa/checkpoint.hpp"
#include "vqa/data.hpp"
#include "vqa/errors.hpp"
#include "vqa/log.hpp"

using namespace vqa;
using testing::random_tensor;

namespace {

FeatureStore random_store(std::size_t count, std::size_t k, std::size_t dv, std::mt19937_64& rng) {
  FeatureStore store(k, dv);
  for (std::size_t i = 0; i < count; ++i) store.add("img" + std::to_string(i), random_tensor({k, dv}, rng));
  return store;
}

FormatFault fault_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.fault();
  }
  FAIL("no FormatError");
  return FormatFault::kBadMagic;
}

// Collects warnings for the lifetime of the object.
struct WarningCapture {
  std::vector<std::string> messages;
  WarningSink previous;
  WarningCapture() {
    previous = set_warning_sink([this](std::string_view m) { messages.emplace_back(m); });
  }
  ~WarningCapture() { set_warning_sink(previous); }
};

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

}  // namespace

TEST_CASE("VQAF layout and round trip") {
  std::mt19937_64 rng(1);
  const FeatureStore store = random_store(2, 6, 4, rng);
  const std::string bytes = encode_features(store);
  CHECK(bytes.size() == 20 + 2 * 6 * 4 * 4);
  CHECK(bytes.substr(0, 4) == "VQAF");

  const FeatureStore back = decode_features(bytes, encode_feature_index(store));
  CHECK(back.count() == 2);
  CHECK(back.regions() == 6);
  CHECK(back.width() == 4);
  for (const auto& [id, ordinal] : store.index()) {
    const Tensor& a = store.get(id);
    const Tensor& b = back.get(id);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == static_cast<double>(static_cast<float>(a[i])));
  }
  // Once values are f32-representable the round trip is byte-identical.
  CHECK(encode_features(back) == bytes);
  CHECK(encode_feature_index(back) == encode_feature_index(store));

  const auto dir = testing::scratch_dir("vqaf");
  write_features(dir / "f.bin", dir / "f.idx", back);
  const FeatureStore loaded = load_features(dir / "f.bin", dir / "f.idx");
  CHECK(encode_features(loaded) == bytes);
  CHECK(std::filesystem::file_size(dir / "f.bin") == bytes.size());
}

TEST_CASE("VQAF errors are distinct") {
  std::mt19937_64 rng(2);
  const FeatureStore store = random_store(2, 3, 2, rng);
  const std::string bytes = encode_features(store), index = encode_feature_index(store);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK(fault_of([&] { decode_features(bad, index); }) == FormatFault::kBadMagic);
  CHECK(fault_of([&] { decode_features(bytes.substr(0, bytes.size() - 1), index); }) == FormatFault::kTruncated);
  CHECK(fault_of([&] { decode_features(bytes.substr(0, 10), index); }) == FormatFault::kTruncated);
  CHECK(fault_of([&] { decode_features(bytes, "img0 0\nimg1 7\n"); }) == FormatFault::kOrdinalOutOfRange);
  std::string version = bytes;
  version[4] = 9;
  CHECK(fault_of([&] { decode_features(version, index); }) == FormatFault::kUnsupportedVersion);
  CHECK_THROWS_AS(store.get("nope"), DataError);
}

TEST_CASE("checkpoint round trip is bitwise") {
  std::mt19937_64 rng(3);
  Checkpoint c;
  c.config_text = "{\"a\": 1}";
  c.params.add("w", random_tensor({3, 4}, rng, -1e3, 1e3));
  c.params.add("b", random_tensor({4}, rng));
  c.params.add("s", Tensor::scalar(-0.0));
  const std::string bytes = encode_checkpoint(c);
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(back.config_text == c.config_text);
  CHECK(back.params.names() == c.params.names());
  for (const auto& name : c.params.names()) CHECK(back.params.get(name) == c.params.get(name));
  CHECK(encode_checkpoint(back) == bytes);

  std::string bad = bytes;
  bad[1] = 'Z';
  CHECK(fault_of([&] { decode_checkpoint(bad); }) == FormatFault::kBadMagic);
  CHECK(fault_of([&] { decode_checkpoint(bytes.substr(0, bytes.size() - 3)); }) == FormatFault::kTruncated);

  const auto dir = testing::scratch_dir("ckpt");
  save_checkpoint(dir / "c.bin", c);
  CHECK(io::read_file(dir / "c.bin") == bytes);
  CHECK(encode_checkpoint(load_checkpoint(dir / "c.bin")) == bytes);
}

TEST_CASE("answer vocabulary order") {
  const std::vector<DatasetRecord> records{
      {"1", "q", "a", {{"yes", 1.0}, {"blue", 0.3}}},
      {"2", "q", "a", {{"no", 1.0}}},
      {"3", "q", "a", {{"yes", 1.0}}},
      {"4", "q", "a", {{"blue", 1.0}}},
  };
  const AnswerVocabulary v = build_answer_vocabulary(records, {"zebra", "apple"});
  CHECK(v.answers() == std::vector<std::string>{"blue", "yes", "no", "apple", "zebra"});
  CHECK(*v.find("no") == 2);
  CHECK(!v.find("maybe"));

  const auto dir = testing::scratch_dir("answers");
  write_answer_vocabulary(dir / "a.txt", v);
  CHECK(load_answer_vocabulary(dir / "a.txt").answers() == v.answers());
}

TEST_CASE("dataset records") {
  const auto dir = testing::scratch_dir("records");
  Vocabulary words;
  for (const char* w : {"is", "it", "red"}) words.add(w);
  AnswerVocabulary answers;
  answers.add("yes");
  answers.add("maybe");

  write_text(dir / "one.jsonl", R"({"question":"is it red","image_id":"a","answers":{"yes":1.0}})" "\n");
  const auto one = load_dataset(dir / "one.jsonl", words, answers);
  REQUIRE(one.size() == 1);
  CHECK(one[0].image_id == "a");
  CHECK(one[0].question.length == 3);
  CHECK(one[0].score_for(0) == 1.0);
  CHECK(one[0].score_for(1) == 0.0);

  write_text(dir / "multi.jsonl", R"({"question":"is it","image_id":"b","answers":{"yes":1.0,"maybe":0.3}})" "\n");
  const auto multi = load_dataset(dir / "multi.jsonl", words, answers);
  CHECK(multi[0].targets.size() == 2);
  CHECK(multi[0].score_for(1) == 0.3);

  {
    WarningCapture warnings;
    write_text(dir / "empty.jsonl", "");
    CHECK(load_dataset(dir / "empty.jsonl", words, answers).empty());
    CHECK(!warnings.messages.empty());
  }
  {
    WarningCapture warnings;
    write_text(dir / "unknown.jsonl", R"({"question":"is it","image_id":"b","answers":{"perhaps":1.0,"yes":0.3}})" "\n");
    const auto u = load_dataset(dir / "unknown.jsonl", words, answers);
    CHECK(u[0].targets.size() == 1);
    CHECK(!warnings.messages.empty());
  }

  write_text(dir / "broken.jsonl", R"({"question":"is it","image_id":"b","answers":{"yes":1.0}})" "\n{oops\n");
  try {
    read_records(dir / "broken.jsonl");
    FAIL("expected an error");
  } catch (const FormatError& e) {
    CHECK(e.fault() == FormatFault::kMalformedRecord);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  write_text(dir / "missing.jsonl", R"({"question":"is it","answers":{"yes":1.0}})" "\n");
  CHECK(fault_of([&] { read_records(dir / "missing.jsonl"); }) == FormatFault::kMissingField);

  const std::vector<DatasetRecord> records{{"x1", "what color", "img", {{"red", 1.0}, {"blue", 0.3}}}};
  write_records(dir / "rt.jsonl", records);
  CHECK(read_records(dir / "rt.jsonl") == records);
}

TEST_CASE("batch_iter") {
  const auto sizes = [](const std::vector<std::vector<std::size_t>>& batches) {
    std::vector<std::size_t> out;
    for (const auto& b : batches) out.push_back(b.size());
    return out;
  };
  CHECK(sizes(batch_iter(10, 4, false, 1, 0)) == std::vector<std::size_t>{4, 4, 2});
  const auto plain = batch_iter(10, 4, false, 1, 0);
  std::vector<std::size_t> flat;
  for (const auto& b : plain) flat.insert(flat.end(), b.begin(), b.end());
  std::vector<std::size_t> expect(10);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(flat == expect);
  CHECK(batch_iter(10, 4, true, 5, 2) == batch_iter(10, 4, true, 5, 2));
  CHECK(batch_iter(10, 4, true, 5, 2) != batch_iter(10, 4, true, 5, 3));

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = testing::random_size(rng, 0, 50), bs = testing::random_size(rng, 1, 12);
    const auto batches = batch_iter(n, bs, true, rng(), trial);
    std::vector<std::size_t> seen;
    for (std::size_t i = 0; i < batches.size(); ++i) {
      if (i + 1 < batches.size()) CHECK(batches[i].size() == bs);
      CHECK(!batches[i].empty());
      seen.insert(seen.end(), batches[i].begin(), batches[i].end());
    }
    std::sort(seen.begin(), seen.end());
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    CHECK(seen == all);
  }
}

TEST_CASE("make_input gathers examples") {
  std::mt19937_64 rng(5);
  FeatureStore store = random_store(3, 2, 3, rng);
  std::vector<VqaExample> examples(2);
  examples[0].image_id = "img2";
  examples[0].targets = {{1, 0.3}};
  examples[0].question.indices = {2, 0};
  examples[0].question.length = 1;
  examples[1].image_id = "img0";
  examples[1].targets = {{0, 1.0}};
  examples[1].question.indices = {3, 2};
  examples[1].question.length = 2;
  const std::vector<std::size_t> which{1, 0};
  const ModelInput in = make_input(examples, which, store, 2);
  CHECK(in.batch_size() == 2);
  CHECK(in.questions[0] == &examples[1].question);
  CHECK(in.targets.values() == std::vector<double>{1.0, 0.0, 0.0, 0.3});
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t d = 0; d < 3; ++d) {
      CHECK(in.features.at(r, d) == store.get("img0").at(r, d));
      CHECK(in.features.at(2 + r, d) == store.get("img2").at(r, d));
    }
}

// ---------------------------------------------------------------------------
// Synthetic tasks. The Bayes rates are recomputed here from the records with
// brute-force counting, independent of the library's helpers.

namespace {

// The only informative question token is "keyN".
std::string key_in(const std::string& question) {
  const auto at = question.find("key");
  auto end = at + 3;
  while (end < question.size() && std::isdigit(static_cast<unsigned char>(question[end]))) ++end;
  return question.substr(at, end - at);
}

double count_question_only(const std::vector<DatasetRecord>& records) {
  // Best constant answer per question key, scored in-sample.
  std::map<std::string, std::map<std::string, double>> totals;
  for (const auto& r : records)
    for (const auto& [a, s] : r.answers) totals[key_in(r.question)][a] += s;
  double best_total = 0.0;
  for (const auto& [q, per_answer] : totals) {
    double best = 0.0;
    for (const auto& [a, s] : per_answer) best = std::max(best, s);
    best_total += best;
  }
  return best_total / static_cast<double>(records.size());
}

}  // namespace

TEST_CASE("synthetic single: determinism, oracle, question-only rate") {
  SyntheticSpec spec;
  spec.n = 1000;
  const SyntheticData a = make_synthetic(spec), b = make_synthetic(spec);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(encode_features(a.features) == encode_features(b.features));
  CHECK(a.word_vectors == b.word_vectors);
  CHECK(a.train.size() == 800);
  CHECK(a.val.size() == 200);

  SyntheticSpec other = spec;
  other.seed = 2;
  CHECK(make_synthetic(other).train != a.train);

  for (std::size_t i = 0; i < a.train.size(); ++i) {
    const NeedleTruth& t = a.train_truth[i];
    REQUIRE(t.marked_rows.size() == 1);
    CHECK(decode_row_class(a.features.get(a.train[i].image_id), t.marked_rows[0], spec) == t.classes[0]);
    CHECK(a.train[i].question.find("key" + std::to_string(t.keys[0])) != std::string::npos);
  }
  CHECK(marked_row_oracle_accuracy(a, a.train, a.train_truth) == 1.0);

  const double q_only = count_question_only(a.train);
  CHECK(std::abs(question_only_bayes_rate(a.train, a.train_truth) - q_only) <= 1e-12);
  CHECK(q_only <= 1.0 / static_cast<double>(spec.classes) + 0.1);
}

TEST_CASE("synthetic dual: oracle and single-row rate") {
  SyntheticSpec spec;
  spec.task = SyntheticTask::kDual;
  spec.n = 1000;
  const SyntheticData d = make_synthetic(spec);
  CHECK(d.train == make_synthetic(spec).train);
  CHECK(d.answers.size() == spec.classes * (spec.classes + 1) / 2);
  CHECK(marked_row_oracle_accuracy(d, d.train, d.train_truth) == 1.0);

  // Brute force: group by the first marked row's class, best answer per group.
  std::map<std::size_t, std::map<std::string, double>> groups;
  for (std::size_t i = 0; i < d.train.size(); ++i) {
    const NeedleTruth& t = d.train_truth[i];
    REQUIRE(t.marked_rows.size() == 2);
    CHECK(t.marked_rows[0] != t.marked_rows[1]);
    const std::size_t c = decode_row_class(d.features.get(d.train[i].image_id), t.marked_rows[0], spec);
    for (const auto& [a, s] : d.train[i].answers) groups[c][a] += s;
  }
  double total = 0.0;
  for (const auto& [key, per_answer] : groups) {
    double best = 0.0;
    for (const auto& [a, s] : per_answer) best = std::max(best, s);
    total += best;
  }
  const double single_row = total / static_cast<double>(d.train.size());
  CHECK(std::abs(single_row_bayes_rate(d, d.train, d.train_truth) - single_row) <= 1e-12);
  CHECK(single_row < 1.0);
}

TEST_CASE("synthetic errors") {
  SyntheticSpec spec;
  spec.regions = 1;
  CHECK_THROWS_AS(make_synthetic(spec), ConfigError);
  spec = {};
  spec.task = SyntheticTask::kDual;
  spec.regions = 2;
  CHECK_THROWS_AS(make_synthetic(spec), ConfigError);
  spec = {};
  spec.classes = 40;  // more classes than the feature block can hold
  CHECK_THROWS_AS(make_synthetic(spec), ConfigError);
}

TEST_CASE("write_synthetic files load back") {
  SyntheticSpec spec;
  spec.n = 50;
  const SyntheticData d = make_synthetic(spec);
  const auto dir = testing::scratch_dir("synth");
  write_synthetic(dir, d);
  for (const char* f : {"vectors.txt", "answers.txt", "train.jsonl", "val.jsonl", "features.bin", "features.idx"})
    CHECK(std::filesystem::exists(dir / f));
  CHECK(read_records(dir / "train.jsonl") == d.train);
  CHECK(load_answer_vocabulary(dir / "answers.txt").answers() == d.answers.answers());
  CHECK(encode_features(load_features(dir / "features.bin", dir / "features.idx")) == encode_features(d.features));
}
