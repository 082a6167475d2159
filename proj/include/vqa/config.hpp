#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "vqa/data.hpp"
#include "vqa/model.hpp"
#include "vqa/optim.hpp"

namespace vqa {

struct PathsConfig {
  std::string train;
  std::string val;
  std::string features;
  std::string feature_index;
  std::string vectors;
  std::string answers;
  std::string out_dir = "out";

  friend bool operator==(const PathsConfig&, const PathsConfig&) = default;
};

// One greedy-search axis: a dotted TrainConfig field and its candidates.
struct SearchAxis {
  std::string field;
  std::vector<nlohmann::json> values;

  friend bool operator==(const SearchAxis&, const SearchAxis&) = default;
};

struct SearchSpace {
  std::vector<SearchAxis> axes;

  std::size_t total_runs() const;
  friend bool operator==(const SearchSpace&, const SearchSpace&) = default;
};

// weight_norm -> activation -> classifier dropout -> hidden -> lr.
SearchSpace default_search_space();

struct GradcheckSettings {
  std::size_t seeds = 20;
  std::size_t batch = 2;
  std::size_t vocab = 8;
  double eps = 1e-5;
  double tolerance = 1e-4;

  friend bool operator==(const GradcheckSettings&, const GradcheckSettings&) = default;
};

struct TrainConfig {
  ModelConfig model;
  AdamaxSettings optimizer;
  std::size_t epochs = 500;
  std::size_t batch_size = 64;
  std::size_t patience = 25;  // 0 disables early stopping
  std::uint64_t seed = 1;
  PathsConfig paths;
  SyntheticSpec synthetic;
  SearchSpace search = default_search_space();
  std::size_t search_budget = 0;  // 0 means no limit
  GradcheckSettings gradcheck;

  void validate() const;
  friend bool operator==(const TrainConfig& a, const TrainConfig& b);
};

// Model dims small enough for exhaustive finite differences
// (K=4, Dv=5, H=6, A=3, D=4), two heads, tanh activations.
TrainConfig tiny_gradcheck_config();

nlohmann::json to_json(const TrainConfig& config);
// Unknown keys anywhere are a ConfigError; missing keys keep defaults.
TrainConfig config_from_json(const nlohmann::json& j);

std::string dump_config(const TrainConfig& config);
TrainConfig parse_config(std::string_view text);
TrainConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const TrainConfig& config);

// Returns a copy with `field` (dotted path, e.g. "model.hidden") set to value.
TrainConfig with_field(const TrainConfig& config, const std::string& field, const nlohmann::json& value);
bool has_field(const TrainConfig& config, const std::string& field);

}  // namespace vqa
