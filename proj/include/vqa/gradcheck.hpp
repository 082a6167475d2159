#pragma once

#include <functional>
#include <map>
#include <string>

#include "vqa/autodiff.hpp"
#include "vqa/params.hpp"

namespace vqa {

struct WorstCoordinate {
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double error = 0.0;
};

struct GradCheckResult {
  double max_error = 0.0;
  std::map<std::string, double> per_parameter;
  std::map<std::string, WorstCoordinate> worst;
  std::size_t coordinates = 0;
};

// |a - n| / max(1e-8, |a| + |n|)
double relative_error(double analytic, double numeric);

// Builds the scalar loss on a fresh graph bound to the given parameters.
// Must be deterministic (fix any dropout seed inside).
using LossBuilder = std::function<ad::Var(ad::Graph&)>;

// Compares reverse-mode gradients against central differences
// (f(p+eps) - f(p-eps)) / (2 eps) for every coordinate of every parameter.
GradCheckResult grad_check(const LossBuilder& build, const ParamStore& params, double eps = 1e-5,
                           const std::function<void(ad::Graph&)>& prepare = {});

// (f(p + eps e_i) - f(p - eps e_i)) / (2 eps) for one coordinate.
double numeric_derivative(const LossBuilder& build, const ParamStore& params, const std::string& name,
                          std::size_t index, double eps);

}  // namespace vqa
