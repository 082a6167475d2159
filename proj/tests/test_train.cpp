#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <omp.h>
#include <random>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "vqa/binary_io.hpp"
#include "vqa/checkpoint.hpp"
#include "vqa/config.hpp"
#include "vqa/errors.hpp"
#include "vqa/heatmap.hpp"
#include "vqa/search.hpp"
#include "vqa/train.hpp"

using namespace vqa;

namespace {

TrainConfig small_run(std::size_t epochs = 3) {
  TrainConfig c;
  c.synthetic.n = 80;
  c.synthetic.regions = 4;
  c.synthetic.feature_width = 10;
  c.synthetic.classes = 4;
  c.synthetic.embed_dim = 6;
  c.model.regions = 4;
  c.model.feature_dim = 10;
  c.model.embed_dim = 6;
  c.model.num_answers = 4;
  c.model.hidden = 8;
  c.epochs = epochs;
  c.batch_size = 16;
  c.patience = 0;
  return c;
}

std::size_t count_lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

}  // namespace

TEST_CASE("training is deterministic") {
  const TrainConfig c = small_run();
  const TrainingData data = load_training_data(c);
  const TrainResult a = train_model(c, data), b = train_model(c, data);
  CHECK(metrics_csv(a.record) == metrics_csv(b.record));
  REQUIRE(a.record.epochs.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(a.record.epochs[e].train_loss == b.record.epochs[e].train_loss);
    CHECK(a.record.epochs[e].val_acc == b.record.epochs[e].val_acc);
  }
  for (const auto& name : a.best_params.names()) CHECK(a.best_params.get(name) == b.best_params.get(name));
}

TEST_CASE("lr = 0 leaves parameters unchanged and the loss flat") {
  TrainConfig c = small_run(4);
  c.optimizer.lr = 0.0;
  c.model.dropout_classifier = 0.0;
  const TrainingData data = load_training_data(c);
  const TrainResult r = train_model(c, data);
  const ModelParams init = init_model(c.model, data.table, c.seed);
  for (const auto& name : init.store.names()) CHECK(r.best_params.get(name) == init.store.get(name));
  for (const auto& e : r.record.epochs) CHECK(std::abs(e.train_loss - r.record.epochs[0].train_loss) <= 1e-12);
}

TEST_CASE("best val accuracy is the max over epochs and evaluate reproduces it") {
  TrainConfig c = small_run(6);
  const TrainingData data = load_training_data(c);
  const TrainResult r = train_model(c, data);
  double best = -1.0;
  std::size_t at = 0;
  for (const auto& e : r.record.epochs) {
    if (e.val_acc > best) {
      best = e.val_acc;
      at = e.epoch;
    }
  }
  CHECK(r.record.best_val_acc == best);
  CHECK(r.record.best_epoch == at);
  const EvalResult ev = evaluate(c.model, r.best_params, data.val, data.features, data.answers);
  CHECK(std::abs(ev.accuracy - r.record.best_val_acc) <= 1e-12);
  CHECK(ev.predictions.size() == data.val.size());

  std::vector<VqaExample> shuffled = data.val;
  std::mt19937_64 rng(3);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const EvalResult ev2 = evaluate(c.model, r.best_params, shuffled, data.features, data.answers, 7);
  CHECK(std::abs(ev2.accuracy - ev.accuracy) <= 1e-12);

  CHECK_THROWS_AS(evaluate(c.model, r.best_params, {}, data.features, data.answers), DataError);

  const std::string csv = predictions_csv(ev);
  CHECK(csv.rfind("id,predicted,score\n", 0) == 0);
  CHECK(count_lines(csv) == data.val.size() + 1);
}

TEST_CASE("batch-size independence of evaluation") {
  const TrainConfig c = small_run(1);
  const TrainingData data = load_training_data(c);
  const ModelParams p = init_model(c.model, data.table, 5);
  const double whole = evaluate(c.model, p.store, data.train, data.features, data.answers, 1000).accuracy;
  for (std::size_t bs : {1, 3, 16, 64})
    CHECK(std::abs(evaluate(c.model, p.store, data.train, data.features, data.answers, bs).accuracy - whole) <= 1e-10);
}

TEST_CASE("early stopping and metrics rows") {
  TrainConfig c = small_run(200);
  c.patience = 2;
  c.optimizer.lr = 0.0;
  const TrainingData data = load_training_data(c);
  const TrainResult r = train_model(c, data);
  // Nothing changes, so nothing improves after the first epoch.
  CHECK(r.record.epochs.size() == 3);
  const std::string csv = metrics_csv(r.record);
  CHECK(csv.rfind("epoch,train_loss,train_acc,val_acc\n", 0) == 0);
  CHECK(count_lines(csv) == r.record.epochs.size() + 1);
}

TEST_CASE("dimension mismatches are data errors before training") {
  TrainConfig c = small_run();
  const TrainingData data = load_training_data(c);
  for (const char* field : {"model.feature_dim", "model.regions", "model.num_answers", "model.embed_dim"}) {
    const TrainConfig bad = with_field(c, field, 3);
    INFO(std::string(field));
    CHECK_THROWS_AS(train_model(bad, data), DataError);
  }
}

TEST_CASE("divergence is a numeric failure with diagnostics") {
  TrainConfig c = small_run(3);
  c.optimizer.lr = 1e300;
  const TrainingData data = load_training_data(c);
  const TrainResult r = train_model(c, data);
  CHECK(r.record.failed);
  CHECK(r.record.failure.find("epoch") != std::string::npos);
  CHECK(r.record.failure.find("norm") != std::string::npos);

  c.paths.out_dir = testing::scratch_dir("diverge").string();
  CHECK_THROWS_AS(train(c), NumericError);
  CHECK(std::filesystem::exists(std::filesystem::path(c.paths.out_dir) / "metrics.csv"));
  CHECK(!std::filesystem::exists(std::filesystem::path(c.paths.out_dir) / "checkpoint.bin"));
}

TEST_CASE("train writes byte-identical outputs for the same config") {
  TrainConfig c = small_run(2);
  const auto dir = testing::scratch_dir("train_twice");
  c.paths.out_dir = (dir / "a").string();
  train(c);
  c.paths.out_dir = (dir / "b").string();
  train(c);
  for (const char* f : {"metrics.csv", "checkpoint.bin"}) CHECK(io::read_file(dir / "a" / f) == io::read_file(dir / "b" / f));

  const Checkpoint ck = load_checkpoint(dir / "a" / "checkpoint.bin");
  TrainConfig stored = checkpoint_config(ck);
  stored.paths.out_dir = c.paths.out_dir;
  CHECK(stored == c);
}

// ---------------------------------------------------------------------------
// Greedy search

namespace {

SearchSpace mock_space() {
  return {{{"model.hidden", {8, 16, 32}},
           {"optimizer.lr", {0.001, 0.01, 0.1, 1.0}},
           {"model.dropout_classifier", {0.0, 0.2, 0.5}}}};
}

// Separable: each axis contributes its own term, optimum hidden=16, lr=0.1,
// dropout=0.2.
double mock_objective(const TrainConfig& c) {
  const double h = std::log2(static_cast<double>(c.model.hidden)) - 4.0;
  const double lr = std::log10(c.optimizer.lr) + 1.0;
  const double d = c.model.dropout_classifier - 0.2;
  return 3.0 - h * h - lr * lr - d * d;
}

RunRecord mock_run(const TrainConfig& c) {
  RunRecord r;
  r.seed = c.seed;
  r.best_val_acc = mock_objective(c);
  r.epochs.push_back({1, 0.0, 0.0, r.best_val_acc});
  r.best_epoch = 1;
  return r;
}

}  // namespace

TEST_CASE("greedy search on a separable mock objective") {
  const SearchSpace space = mock_space();
  const TrainConfig base;
  const SearchResult r = greedy_search(space, base, 0, mock_run);
  CHECK(r.runs.size() == 3 + 4 + 3);
  CHECK(!r.truncated);

  // Exhaustive grid, the oracle.
  double best = -1e300;
  TrainConfig arg;
  for (const auto& h : space.axes[0].values)
    for (const auto& lr : space.axes[1].values)
      for (const auto& d : space.axes[2].values) {
        const TrainConfig c = with_field(with_field(with_field(base, "model.hidden", h), "optimizer.lr", lr),
                                         "model.dropout_classifier", d);
        if (mock_objective(c) > best) {
          best = mock_objective(c);
          arg = c;
        }
      }
  CHECK(r.best == arg);
  CHECK(r.best.seed == base.seed);

  std::set<std::uint64_t> seeds;
  for (const auto& run : r.runs) {
    seeds.insert(run.config.seed);
    CHECK(run.config.seed == derive_seed(base.seed, run.axis, run.candidate));
  }
  CHECK(seeds.size() == r.runs.size());
}

TEST_CASE("greedy search run counts") {
  const TrainConfig base;
  CHECK(greedy_search({{{"model.hidden", {8, 16, 32}}}}, base, 0, mock_run).runs.size() == 3);
  const SearchSpace two{{{"model.hidden", {8, 16, 32}}, {"optimizer.lr", {0.001, 0.01, 0.1, 1.0}}}};
  CHECK(greedy_search(two, base, 0, mock_run).runs.size() == 7);
}

TEST_CASE("greedy search ties go to the earlier candidate") {
  const auto flat = [](const TrainConfig& c) {
    RunRecord r;
    r.seed = c.seed;
    r.best_val_acc = 0.5;
    r.epochs.push_back({1, 0.0, 0.0, 0.5});
    return r;
  };
  const SearchResult r = greedy_search({{{"model.hidden", {8, 16, 32}}}}, TrainConfig{}, 0, flat);
  CHECK(r.best.model.hidden == 8);
}

TEST_CASE("failed runs score -inf and are kept") {
  const auto flaky = [](const TrainConfig& c) -> RunRecord {
    if (c.model.hidden == 16) throw TrainingDiverged("loss is nan");
    return mock_run(c);
  };
  const SearchResult r = greedy_search(mock_space(), TrainConfig{}, 0, flaky);
  CHECK(r.runs.size() == 10);
  const auto& failed = r.runs[1];
  CHECK(failed.record.failed);
  CHECK(failed.score == -std::numeric_limits<double>::infinity());
  CHECK(failed.record.failure.find("nan") != std::string::npos);
  // 8 and 32 score the same once 16 is out; the earlier one wins.
  CHECK(r.best.model.hidden == 8);
  CHECK(r.best.optimizer.lr == 0.1);
  CHECK(search_csv(r).find("failed") != std::string::npos);

  const auto hopeless = [](const TrainConfig&) -> RunRecord { throw TrainingDiverged("nan"); };
  const SearchResult all = greedy_search({{{"model.hidden", {8, 16}}}}, TrainConfig{}, 0, hopeless);
  CHECK(all.best.model.hidden == TrainConfig{}.model.hidden);
}

TEST_CASE("search budget truncates") {
  const SearchResult r = greedy_search(mock_space(), TrainConfig{}, 5, mock_run);
  CHECK(r.truncated);
  CHECK(r.runs.size() == 5);
  CHECK(r.best.model.hidden == 16);
}

TEST_CASE("search outcome does not depend on thread count") {
  const TrainConfig c = small_run(2);
  const TrainingData data = load_training_data(c);
  const SearchSpace space{{{"model.hidden", {4, 8}}, {"optimizer.lr", {0.002, 0.01}}}};
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const SearchResult serial = greedy_search(space, c, 0, training_runner(data));
  omp_set_num_threads(4);
  const SearchResult parallel = greedy_search(space, c, 0, training_runner(data));
  omp_set_num_threads(saved);
  CHECK(serial.best == parallel.best);
  REQUIRE(serial.runs.size() == parallel.runs.size());
  for (std::size_t i = 0; i < serial.runs.size(); ++i) CHECK(metrics_csv(serial.runs[i].record) == metrics_csv(parallel.runs[i].record));
  CHECK(search_csv(serial) == search_csv(parallel));
}

// ---------------------------------------------------------------------------
// Heatmaps

TEST_CASE("heatmap rows, head sum and graymap") {
  TrainConfig c = small_run(1);
  c.synthetic.regions = 9;
  c.synthetic.feature_width = 14;
  c.model.regions = 9;
  c.model.feature_dim = 14;
  c.model.attention = attention_preset("A3x2");
  const TrainingData data = load_training_data(c);
  const ModelParams p = init_model(c.model, data.table, 2);
  const Heatmap map = compute_heatmap(c.model, p.store, data.val[0], data.features);
  REQUIRE(map.heads.size() == 2);
  CHECK(map.combined.size() == 9);

  const std::string text = heatmap_text(map);
  CHECK(count_lines(text) == 3);
  const Heatmap back = parse_heatmap_text(text);
  CHECK(back.heads == map.heads);
  CHECK(back.combined == map.combined);
  for (std::size_t i = 0; i < 9; ++i) CHECK(std::abs(back.combined[i] - (back.heads[0][i] + back.heads[1][i])) <= 1e-12);

  CHECK(grid_side(9) == 3u);
  CHECK(grid_side(36) == 6u);
  CHECK(!grid_side(6));
  const std::string pgm = heatmap_pgm(map.heads[0], 3);
  const std::string header = "P5\n3 3\n255\n";
  REQUIRE(pgm.size() == header.size() + 9);
  CHECK(pgm.substr(0, header.size()) == header);
  const auto pixels = pgm.substr(header.size());
  const std::size_t hottest = std::max_element(map.heads[0].begin(), map.heads[0].end()) - map.heads[0].begin();
  const std::size_t coldest = std::min_element(map.heads[0].begin(), map.heads[0].end()) - map.heads[0].begin();
  CHECK(static_cast<unsigned char>(pixels[hottest]) == 255);
  CHECK(static_cast<unsigned char>(pixels[coldest]) == 0);

  const auto dir = testing::scratch_dir("heatmap");
  const auto files = export_heatmap(map, dir / "h.txt");
  CHECK(files.size() == 3);
  CHECK(std::filesystem::exists(dir / "h_head1.pgm"));
  CHECK(std::filesystem::exists(dir / "h_head2.pgm"));
}
