#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "vqa/tensor.hpp"

namespace testing {

inline vqa::Tensor random_tensor(vqa::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  vqa::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.data()) v = u(rng);
  return t;
}

inline std::size_t random_size(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Fresh directory under the build tree's temp area.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("vqa_tests_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
