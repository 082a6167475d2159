#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "vqa/tensor.hpp"

namespace vqa {

// Named trainable tensors in registration order. Order is part of the
// checkpoint format, so it must be deterministic.
class ParamStore {
 public:
  void add(std::string name, Tensor value);
  bool contains(std::string_view name) const;

  const Tensor& get(std::string_view name) const;
  Tensor& get(std::string_view name);

  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t size() const noexcept { return names_.size(); }
  std::size_t scalar_count() const;

  friend bool operator==(const ParamStore&, const ParamStore&) = default;

 private:
  std::vector<std::string> names_;
  std::map<std::string, Tensor, std::less<>> values_;
};

// Gradient per parameter name; shapes mirror the ParamStore.
using Gradients = std::map<std::string, Tensor, std::less<>>;

}  // namespace vqa
