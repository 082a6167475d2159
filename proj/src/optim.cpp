#include "vqa/optim.hpp"

#include <algorithm>
#include <cmath>

#include "vqa/errors.hpp"

namespace vqa {

void adamax_step(ParamStore& params, const Gradients& grads, AdamaxState& state, const AdamaxSettings& settings) {
  if (!(settings.lr >= 0.0)) throw ConfigError("adamax: learning rate must be non-negative");
  if (!(settings.beta1 >= 0.0 && settings.beta1 < 1.0) || !(settings.beta2 >= 0.0 && settings.beta2 < 1.0)) {
    throw ConfigError("adamax: beta1 and beta2 must lie in [0,1)");
  }
  for (const auto& [name, grad] : grads) {
    if (params.get(name).shape() != grad.shape()) {
      throw ShapeError("adamax: gradient for " + name + " has shape " + to_string(grad.shape()) + ", parameter " +
                       to_string(params.get(name).shape()));
    }
    for (double g : grad.data()) {
      if (std::isnan(g)) throw NumericError("adamax: NaN gradient in parameter " + name);
    }
  }

  ++state.step;
  const double step_size = settings.lr / (1.0 - std::pow(settings.beta1, static_cast<double>(state.step)));
  for (const auto& [name, grad] : grads) {
    Tensor& theta = params.get(name);
    auto [it, inserted] = state.moments.try_emplace(name);
    auto& moments = it->second;
    if (inserted) {
      moments.m = Tensor::zeros_like(theta);
      moments.u = Tensor::zeros_like(theta);
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
      moments.m[i] = settings.beta1 * moments.m[i] + (1.0 - settings.beta1) * grad[i];
      moments.u[i] = std::max(settings.beta2 * moments.u[i], std::abs(grad[i]));
      if (moments.u[i] == 0.0) continue;
      theta[i] -= step_size * moments.m[i] / moments.u[i];
    }
  }
}

}  // namespace vqa
