#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vqa/config.hpp"
#include "vqa/gradcheck.hpp"
#include "vqa/model.hpp"

namespace vqa {

inline constexpr std::size_t kGradcheckSizeLimit = 10000;  // K * Dv * H * A

struct GradcheckReport {
  std::vector<std::uint64_t> seeds;
  std::vector<double> per_seed_max;
  std::map<std::string, double> per_group;  // max over seeds
  std::map<std::string, WorstCoordinate> worst;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::size_t coordinates = 0;

  bool passed() const { return max_error < tolerance; }
};

// "att.h0.fa.direction" -> "att.h0.fa"
std::string parameter_group(const std::string& name);

// Random model and batch for one seed. Dropout masks are drawn from a fixed
// seed on every evaluation so the loss is a deterministic function.
struct GradcheckProblem {
  ModelConfig model;
  ParamStore params;
  std::vector<PaddedQuestion> questions;
  ModelInput input;  // points into `questions`
  std::uint64_t dropout_seed = 0;

  ad::Var loss(ad::Graph& graph) const;
  LossBuilder builder() const {
    return [this](ad::Graph& g) { return loss(g); };
  }
};

std::unique_ptr<GradcheckProblem> make_gradcheck_problem(const TrainConfig& config, std::uint64_t seed);

// The full model loss checked against central differences. `corrupt_op`
// scales that op's backward by 2.
GradCheckResult gradcheck_once(const TrainConfig& config, std::uint64_t seed,
                               const std::optional<std::string>& corrupt_op = std::nullopt);

// Runs config.gradcheck.seeds seeds starting at config.seed. Refuses
// (ConfigError) when K * Dv * H * A exceeds kGradcheckSizeLimit.
GradcheckReport run_gradcheck(const TrainConfig& config, const std::optional<std::string>& corrupt_op = std::nullopt);

std::string format_report(const GradcheckReport& report);

}  // namespace vqa
