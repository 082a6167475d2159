#include "vqa/layers.hpp"

#include <cmath>

namespace vqa::nn {

Tensor glorot_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor out(Shape{rows, cols});
  for (double& v : out.data()) v = dist(rng);
  return out;
}

void init_linear(ParamStore& store, std::string_view name, std::size_t in, std::size_t out, bool weight_norm,
                 std::mt19937_64& rng, bool bias) {
  const std::string prefix(name);
  Tensor weight = glorot_uniform(out, in, rng);
  if (weight_norm) {
    Tensor gain(Shape{out});
    for (std::size_t r = 0; r < out; ++r) {
      double sq = 0.0;
      for (std::size_t c = 0; c < in; ++c) sq += weight.at(r, c) * weight.at(r, c);
      gain[r] = std::sqrt(sq);
    }
    store.add(prefix + ".direction", std::move(weight));
    store.add(prefix + ".gain", std::move(gain));
  } else {
    store.add(prefix + ".weight", std::move(weight));
  }
  if (bias) store.add(prefix + ".bias", Tensor(Shape{out}));
}

LinearVars bind_linear(ad::Graph& graph, std::string_view name, bool weight_norm, bool bias) {
  const std::string prefix(name);
  const ad::Var weight = weight_norm
                             ? ad::weight_norm(graph.parameter(prefix + ".direction"), graph.parameter(prefix + ".gain"))
                             : graph.parameter(prefix + ".weight");
  if (bias) return LinearVars{weight, graph.parameter(prefix + ".bias")};
  return LinearVars{weight, graph.constant(Tensor(Shape{weight.shape().at(0)}))};
}

LinearVars constant_linear(ad::Graph& graph, const LinearParams& params) {
  return LinearVars{graph.constant(params.weight), graph.constant(params.bias)};
}

}  // namespace vqa::nn
