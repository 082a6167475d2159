#include "vqa/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace vqa {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

GradCheckResult grad_check(const LossBuilder& build, const ParamStore& params, double eps,
                           const std::function<void(ad::Graph&)>& prepare) {
  Gradients analytic;
  {
    ad::Graph graph(&params);
    if (prepare) prepare(graph);
    graph.backward(build(graph));
    analytic = graph.parameter_gradients();
  }

  auto evaluate = [&build](const ParamStore& p) {
    ad::Graph graph(&p);
    return build(graph).value().item();
  };

  GradCheckResult result;
  ParamStore probe = params;
  for (const std::string& name : params.names()) {
    WorstCoordinate worst;
    const Tensor& grad = analytic.at(name);
    for (std::size_t i = 0; i < params.get(name).size(); ++i) {
      const double original = params.get(name)[i];
      probe.get(name)[i] = original + eps;
      const double plus = evaluate(probe);
      probe.get(name)[i] = original - eps;
      const double minus = evaluate(probe);
      probe.get(name)[i] = original;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double err = relative_error(grad[i], numeric);
      if (err > worst.error || i == 0) worst = {i, grad[i], numeric, err};
      ++result.coordinates;
    }
    result.per_parameter[name] = worst.error;
    result.worst[name] = worst;
    result.max_error = std::max(result.max_error, worst.error);
  }
  return result;
}

double numeric_derivative(const LossBuilder& build, const ParamStore& params, const std::string& name,
                          std::size_t index, double eps) {
  ParamStore probe = params;
  const double original = params.get(name)[index];
  probe.get(name)[index] = original + eps;
  double plus = 0.0, minus = 0.0;
  {
    ad::Graph graph(&probe);
    plus = build(graph).value().item();
  }
  probe.get(name)[index] = original - eps;
  {
    ad::Graph graph(&probe);
    minus = build(graph).value().item();
  }
  return (plus - minus) / (2.0 * eps);
}

}  // namespace vqa
