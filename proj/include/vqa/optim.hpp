#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "vqa/params.hpp"

namespace vqa {

struct AdamaxSettings {
  double lr = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
};

// Adamax moments: m is the first moment, u the exponentially weighted
// infinity norm of past gradients.
struct AdamaxState {
  struct Moments {
    Tensor m;
    Tensor u;
  };
  std::map<std::string, Moments, std::less<>> moments;
  std::int64_t step = 0;
};

// One Adamax update over every parameter that has a gradient entry.
// Throws NumericError naming the parameter if any gradient is NaN; in that
// case nothing is modified.
void adamax_step(ParamStore& params, const Gradients& grads, AdamaxState& state, const AdamaxSettings& settings);

}  // namespace vqa
