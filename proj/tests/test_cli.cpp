#include <doctest.h>

#include <filesystem>

#include "cli.hpp"
#include "helpers.hpp"
#include "vqa/binary_io.hpp"
#include "vqa/config.hpp"
#include "vqa/errors.hpp"

using namespace vqa;
namespace fs = std::filesystem;

namespace {

int vqa_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "vqa");
  return cli::run(args);
}

}  // namespace

TEST_CASE("exit codes for library errors") {
  CHECK(cli::exit_code_for(ConfigError("x")) == 1);
  CHECK(cli::exit_code_for(DataError("x")) == 2);
  CHECK(cli::exit_code_for(FormatError(FormatFault::kTruncated, "x")) == 2);
  CHECK(cli::exit_code_for(NumericError("x")) == 3);
  CHECK(cli::exit_code_for(std::runtime_error("x")) == 1);
}

TEST_CASE("usage errors") {
  CHECK(vqa_cli({}) == 1);
  CHECK(vqa_cli({"--help"}) == 0);
  CHECK(vqa_cli({"fly"}) == 1);
  CHECK(vqa_cli({"train", "--bogus"}) == 1);
  CHECK(vqa_cli({"train", "--config", "/nonexistent.json"}) == 1);

  const auto dir = testing::scratch_dir("cli_usage");
  io::write_file(dir / "bad.json", R"({"model": {"hiden": 3}})");
  CHECK(vqa_cli({"train", "--config", (dir / "bad.json").string()}) == 1);
  CHECK(vqa_cli({"gradcheck", "--corrupt-op", "no_such_op"}) == 1);
}

TEST_CASE("data errors") {
  const auto dir = testing::scratch_dir("cli_data");
  TrainConfig c;
  c.paths.train = (dir / "missing.jsonl").string();
  c.paths.val = c.paths.train;
  c.paths.vectors = (dir / "missing.txt").string();
  c.paths.features = (dir / "missing.bin").string();
  c.paths.feature_index = (dir / "missing.idx").string();
  save_config(dir / "c.json", c);
  CHECK(vqa_cli({"train", "--config", (dir / "c.json").string(), "--out-dir", (dir / "out").string()}) == 2);
}

TEST_CASE("gradcheck exits 3 when a backward rule is broken") {
  CHECK(vqa_cli({"gradcheck", "--seeds", "1", "--corrupt-op", "linear"}) == 3);
}

TEST_CASE("end to end: synth-data, train, eval, heatmap, search") {
  const auto dir = testing::scratch_dir("cli_e2e");
  TrainConfig c;
  c.synthetic.n = 60;
  c.synthetic.regions = 4;
  c.synthetic.feature_width = 10;
  c.synthetic.classes = 4;
  c.model.hidden = 6;
  c.epochs = 2;
  c.batch_size = 16;
  c.search.axes = {{"model.hidden", {4, 6}}, {"optimizer.lr", {0.002, 0.01}}};
  save_config(dir / "base.json", c);

  const std::string data_dir = (dir / "data").string();
  REQUIRE(vqa_cli({"synth-data", "--config", (dir / "base.json").string(), "--out-dir", data_dir, "--seed", "3"}) == 0);
  const std::string cfg = (fs::path(data_dir) / "config.json").string();
  const TrainConfig written = load_config(cfg);
  CHECK(written.synthetic.seed == 3);
  CHECK(written.model.regions == 4);

  const std::string run_dir = (dir / "run").string();
  REQUIRE(vqa_cli({"train", "--config", cfg, "--out-dir", run_dir}) == 0);
  for (const char* f : {"metrics.csv", "checkpoint.bin", "run.json"}) CHECK(fs::exists(fs::path(run_dir) / f));
  const std::string metrics = io::read_file(fs::path(run_dir) / "metrics.csv");
  CHECK(metrics.rfind("epoch,train_loss,train_acc,val_acc\n", 0) == 0);

  CHECK(vqa_cli({"eval", "--config", cfg, "--out-dir", run_dir}) == 0);
  CHECK(fs::exists(fs::path(run_dir) / "predictions.csv"));
  CHECK(vqa_cli({"eval", "--config", cfg, "--out-dir", run_dir, "--split", "sideways"}) == 1);
  CHECK(vqa_cli({"eval", "--config", cfg, "--checkpoint", (dir / "none.bin").string()}) == 2);

  CHECK(vqa_cli({"heatmap", "--config", cfg, "--out-dir", run_dir, "--example", "q55"}) == 0);
  CHECK(fs::exists(fs::path(run_dir) / "heatmap_q55.txt"));
  CHECK(fs::exists(fs::path(run_dir) / "heatmap_q55_head1.pgm"));
  CHECK(vqa_cli({"heatmap", "--config", cfg, "--out-dir", run_dir, "--example", "nope"}) == 2);

  const std::string search_dir = (dir / "search").string();
  CHECK(vqa_cli({"search", "--config", cfg, "--out-dir", search_dir}) == 0);
  const std::string csv = io::read_file(fs::path(search_dir) / "search.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK_NOTHROW(load_config(fs::path(search_dir) / "best_config.json"));

  // A truncated checkpoint is a data error.
  const std::string bytes = io::read_file(fs::path(run_dir) / "checkpoint.bin");
  io::write_file(dir / "short.bin", bytes.substr(0, bytes.size() / 2));
  CHECK(vqa_cli({"eval", "--config", cfg, "--checkpoint", (dir / "short.bin").string()}) == 2);
}
