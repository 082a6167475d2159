#include "vqa/params.hpp"

#include "vqa/errors.hpp"

namespace vqa {

void ParamStore::add(std::string name, Tensor value) {
  if (values_.contains(name)) throw ContractError("parameter registered twice: " + name);
  names_.push_back(name);
  values_.emplace(std::move(name), std::move(value));
}

bool ParamStore::contains(std::string_view name) const { return values_.find(name) != values_.end(); }

const Tensor& ParamStore::get(std::string_view name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw ContractError("unknown parameter: " + std::string(name));
  return it->second;
}

Tensor& ParamStore::get(std::string_view name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw ContractError("unknown parameter: " + std::string(name));
  return it->second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t total = 0;
  for (const auto& [name, value] : values_) total += value.size();
  return total;
}

}  // namespace vqa
