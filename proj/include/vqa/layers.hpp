#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <string_view>

#include "vqa/autodiff.hpp"
#include "vqa/params.hpp"

namespace vqa::nn {

// Plain affine parameters: weight [out x in], bias [out].
struct LinearParams {
  Tensor weight;
  Tensor bias;
};

// Effective weight/bias of a fully connected layer inside one graph.
struct LinearVars {
  ad::Var weight;
  ad::Var bias;
};

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

// Registers "<name>.weight"/"<name>.bias", or with weight normalization
// "<name>.direction"/"<name>.gain"/"<name>.bias". Gains start at the row
// norms of the direction so the initial effective weight is the direction.
// Without `bias` the layer has no bias parameter and binds a zero constant.
void init_linear(ParamStore& store, std::string_view name, std::size_t in, std::size_t out, bool weight_norm,
                 std::mt19937_64& rng, bool bias = true);

LinearVars bind_linear(ad::Graph& graph, std::string_view name, bool weight_norm, bool bias = true);
LinearVars constant_linear(ad::Graph& graph, const LinearParams& params);

inline ad::Var apply(const LinearVars& layer, ad::Var x) { return ad::linear(x, layer.weight, layer.bias); }

}  // namespace vqa::nn
