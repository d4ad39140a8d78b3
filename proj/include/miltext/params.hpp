#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "miltext/tensor.hpp"

namespace miltext {

struct Parameter {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

// Ordered collection of named parameters. Names are unique; iteration order
// is insertion order, which fixes the RNG consumption order at init time and
// the byte layout of checkpoints.
class ModelParams {
 public:
  Parameter& add(std::string name, Tensor t, bool trainable = true) {
    if (index_.count(name)) throw Error("ModelParams: duplicate parameter name '" + name + "'");
    index_[name] = items_.size();
    items_.push_back(Parameter{std::move(name), std::move(t), trainable});
    return items_.back();
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Parameter& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("ModelParams: unknown parameter '" + name + "'");
    return items_[it->second];
  }
  const Parameter& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("ModelParams: unknown parameter '" + name + "'");
    return items_[it->second];
  }

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }
  size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

 private:
  std::vector<Parameter> items_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace miltext
