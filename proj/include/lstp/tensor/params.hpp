#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lstp/tensor/array.hpp"

namespace lstp::tensor {

/// Ordered collection of named trainable arrays. Slot index = insertion order.
template <typename T>
class ParamStore {
 public:
  std::size_t add(std::string name, Array<T> value) {
    if (index_.contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
    index_.emplace(name, arrays_.size());
    names_.push_back(std::move(name));
    arrays_.push_back(std::move(value));
    return arrays_.size() - 1;
  }

  bool contains(std::string_view name) const { return index_.contains(std::string(name)); }

  std::size_t index(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ContractError("no parameter named '" + std::string(name) + "'");
    return it->second;
  }

  std::size_t size() const noexcept { return arrays_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  Array<T>& operator[](std::size_t i) { return arrays_[i]; }
  const Array<T>& operator[](std::size_t i) const { return arrays_[i]; }
  Array<T>& at(std::string_view name) { return arrays_[index(name)]; }
  const Array<T>& at(std::string_view name) const { return arrays_[index(name)]; }

  std::vector<Array<T>>& arrays() noexcept { return arrays_; }
  const std::vector<Array<T>>& arrays() const noexcept { return arrays_; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& a : arrays_) n += a.size();
    return n;
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (std::size_t i = 0; i < arrays_.size(); ++i) out.add(names_[i], arrays_[i].template cast<U>());
    return out;
  }

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    return a.names_ == b.names_ && a.arrays_ == b.arrays_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Array<T>> arrays_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace lstp::tensor
