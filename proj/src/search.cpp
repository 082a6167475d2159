#include "vqa/search.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "vqa/log.hpp"

namespace vqa {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::size_t axis, std::size_t candidate) {
  return mix(mix(mix(base) ^ axis) ^ candidate);
}

SearchResult greedy_search(const SearchSpace& space, const TrainConfig& base, std::size_t budget, const RunFn& run) {
  for (const SearchAxis& axis : space.axes) {
    if (axis.values.empty()) throw ConfigError("search axis " + axis.field + " has no candidates");
    if (!has_field(base, axis.field)) throw ConfigError("search axis names unknown field " + axis.field);
  }
  SearchResult result;
  result.best = base;
  std::size_t remaining = budget == 0 ? space.total_runs() : budget;
  if (remaining < space.total_runs()) {
    result.truncated = true;
    warn("search budget " + std::to_string(budget) + " is below the " + std::to_string(space.total_runs()) +
         " candidate runs; later candidates are skipped");
  }

  for (std::size_t a = 0; a < space.axes.size() && remaining > 0; ++a) {
    const SearchAxis& axis = space.axes[a];
    const std::size_t count = std::min(axis.values.size(), remaining);
    remaining -= count;

    std::vector<SearchRun> runs(count);
    for (std::size_t c = 0; c < count; ++c) {
      SearchRun& r = runs[c];
      r.axis = a;
      r.candidate = c;
      r.field = axis.field;
      r.value = axis.values[c];
      r.config = result.best;
      r.config.seed = derive_seed(base.seed, a, c);
    }

#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t c = 0; c < count; ++c) {
      SearchRun& r = runs[c];
      try {
        r.config = with_field(r.config, r.field, r.value);
        r.config.seed = derive_seed(base.seed, a, c);
        r.record = run(r.config);
      } catch (const std::exception& e) {
        r.record.failed = true;
        r.record.failure = e.what();
      }
      r.record.seed = r.config.seed;
      r.score = r.record.failed || r.record.epochs.empty() ? -std::numeric_limits<double>::infinity()
                                                            : r.record.best_val_acc;
    }

    std::size_t best = 0;
    for (std::size_t c = 1; c < count; ++c) {
      if (runs[c].score > runs[best].score) best = c;
    }
    for (const SearchRun& r : runs) {
      if (r.record.failed) warn("search run " + r.field + "=" + r.value.dump() + " failed: " + r.record.failure);
    }
    if (std::isfinite(runs[best].score)) {
      const std::uint64_t seed = result.best.seed;
      result.best = with_field(result.best, axis.field, axis.values[best]);
      result.best.seed = seed;
    } else {
      warn("every candidate of " + axis.field + " failed; keeping the current value");
    }
    for (SearchRun& r : runs) result.runs.push_back(std::move(r));
  }
  return result;
}

RunFn training_runner(const TrainingData& data) {
  return [&data](const TrainConfig& config) {
    TrainResult trained = train_model(config, data);
    return std::move(trained.record);
  };
}

std::string search_csv(const SearchResult& result) {
  std::string out = "run,axis,field,value,seed,best_val_acc,best_epoch,status\n";
  char buf[64];
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const SearchRun& r = result.runs[i];
    std::snprintf(buf, sizeof buf, "%.17g", r.score);
    std::string value = r.value.dump();
    if (value.find(',') != std::string::npos) value = "\"" + value + "\"";
    out += std::to_string(i) + "," + std::to_string(r.axis) + "," + r.field + "," + value + "," +
           std::to_string(r.config.seed) + "," + buf + "," + std::to_string(r.record.best_epoch) + "," +
           (r.record.failed ? "failed" : "ok") + "\n";
  }
  return out;
}

}  // namespace vqa
