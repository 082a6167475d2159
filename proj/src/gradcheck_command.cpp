#include "vqa/gradcheck_command.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

#include "vqa/errors.hpp"
#include "vqa/model.hpp"

namespace vqa {

std::string parameter_group(const std::string& name) {
  const std::size_t dot = name.rfind('.');
  return dot == std::string::npos ? name : name.substr(0, dot);
}

std::unique_ptr<GradcheckProblem> make_gradcheck_problem(const TrainConfig& config, std::uint64_t seed) {
  const ModelConfig& model = config.model;
  const GradcheckSettings& gc = config.gradcheck;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto problem = std::make_unique<GradcheckProblem>();
  problem->model = model;
  EmbeddingTable table;
  table.vectors = Tensor(Shape{gc.vocab, model.embed_dim});
  for (std::size_t i = model.embed_dim; i < table.vectors.size(); ++i) table.vectors[i] = normal(rng);
  table.trainable.assign(gc.vocab, true);
  table.trainable[kPadIndex] = false;
  problem->params = init_model(model, table, rng()).store;

  problem->questions.resize(gc.batch);
  std::uniform_int_distribution<std::size_t> length(1, model.max_question_length);
  std::uniform_int_distribution<std::size_t> token(kUnkIndex, gc.vocab - 1);
  for (PaddedQuestion& q : problem->questions) {
    q.length = length(rng);
    q.indices.assign(model.max_question_length, kPadIndex);
    for (std::size_t t = 0; t < q.length; ++t) q.indices[t] = token(rng);
  }
  ModelInput& input = problem->input;
  for (const PaddedQuestion& q : problem->questions) input.questions.push_back(&q);
  input.features = Tensor(Shape{gc.batch * model.regions, model.feature_dim});
  for (double& v : input.features.data()) v = normal(rng);
  input.targets = Tensor(Shape{gc.batch, model.num_answers});
  for (double& v : input.targets.data()) v = unit(rng);
  problem->dropout_seed = rng();
  return problem;
}

ad::Var GradcheckProblem::loss(ad::Graph& graph) const {
  std::mt19937_64 dropout_rng(dropout_seed);
  return *build_model(graph, model, input, Mode::kTrain, &dropout_rng).loss;
}

GradCheckResult gradcheck_once(const TrainConfig& config, std::uint64_t seed,
                               const std::optional<std::string>& corrupt_op) {
  const auto problem = make_gradcheck_problem(config, seed);
  if (corrupt_op) {
    ad::Graph probe(&problem->params);
    problem->loss(probe);
    if (!probe.uses_op(*corrupt_op)) throw ConfigError("op '" + *corrupt_op + "' does not occur in the model graph");
  }
  std::function<void(ad::Graph&)> prepare;
  if (corrupt_op) prepare = [&](ad::Graph& graph) { graph.corrupt_backward(*corrupt_op, 2.0); };
  return grad_check(problem->builder(), problem->params, config.gradcheck.eps, prepare);
}

GradcheckReport run_gradcheck(const TrainConfig& config, const std::optional<std::string>& corrupt_op) {
  const ModelConfig& m = config.model;
  const std::size_t size = m.regions * m.feature_dim * m.hidden * m.num_answers;
  if (size > kGradcheckSizeLimit) {
    throw ConfigError("gradcheck refuses K*Dv*H*A = " + std::to_string(size) + " (limit " +
                      std::to_string(kGradcheckSizeLimit) +
                      "): finite differences perturb every coordinate twice, shrink the model");
  }
  if (config.gradcheck.seeds == 0) throw ConfigError("gradcheck.seeds must be at least 1");
  GradcheckReport report;
  report.tolerance = config.gradcheck.tolerance;
  for (std::size_t i = 0; i < config.gradcheck.seeds; ++i) {
    const std::uint64_t seed = config.seed + i;
    const GradCheckResult r = gradcheck_once(config, seed, corrupt_op);
    report.seeds.push_back(seed);
    report.per_seed_max.push_back(r.max_error);
    report.coordinates += r.coordinates;
    report.max_error = std::max(report.max_error, r.max_error);
    for (const auto& [name, err] : r.per_parameter) {
      const std::string group = parameter_group(name);
      if (!report.per_group.contains(group) || err > report.per_group[group]) {
        report.per_group[group] = err;
        report.worst[group] = r.worst.at(name);
      }
    }
  }
  return report;
}

std::string format_report(const GradcheckReport& report) {
  std::string out;
  char buf[160];
  for (const auto& [group, err] : report.per_group) {
    const WorstCoordinate& w = report.worst.at(group);
    std::snprintf(buf, sizeof buf, "%-16s %.3e  analytic %+.6e numeric %+.6e  %s\n", group.c_str(), err, w.analytic,
                  w.numeric, err < report.tolerance ? "ok" : "FAIL");
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "seeds %zu, coordinates %zu, max relative error %.3e (tolerance %.1e): %s\n",
                report.seeds.size(), report.coordinates, report.max_error, report.tolerance,
                report.passed() ? "pass" : "fail");
  out += buf;
  return out;
}

}  // namespace vqa
