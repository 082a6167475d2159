#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vqa/config.hpp"
#include "vqa/train.hpp"

namespace vqa {

struct SearchRun {
  std::size_t axis = 0;
  std::size_t candidate = 0;
  std::string field;
  nlohmann::json value;
  TrainConfig config;
  RunRecord record;
  double score = 0.0;  // best val accuracy, -inf for a failed run
};

struct SearchResult {
  TrainConfig best;
  std::vector<SearchRun> runs;
  bool truncated = false;
};

// Trains one candidate. Errors thrown from here mark the run failed.
using RunFn = std::function<RunRecord(const TrainConfig&)>;

// Seed given to candidate `candidate` of axis `axis`.
std::uint64_t derive_seed(std::uint64_t base, std::size_t axis, std::size_t candidate);

// Tunes one axis at a time in order, fixing each axis at its best candidate
// (ties to the earlier one) before moving on. A budget below the number of
// candidates truncates with a warning; 0 means unlimited. Candidates of one
// axis may run concurrently; the outcome does not depend on scheduling.
SearchResult greedy_search(const SearchSpace& space, const TrainConfig& base, std::size_t budget, const RunFn& run);

// Default runner: trains on the config's data, in memory.
RunFn training_runner(const TrainingData& data);

// "run,axis,field,value,seed,best_val_acc,best_epoch,status" with a header row.
std::string search_csv(const SearchResult& result);

}  // namespace vqa
