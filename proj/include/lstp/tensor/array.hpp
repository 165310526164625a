#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "lstp/error.hpp"

namespace lstp::tensor {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape);

/// Dense row-major array. A rank-0 shape holds one scalar.
template <typename T>
class Array {
 public:
  using value_type = T;

  Array() = default;

  /// Zero-filled array of the given shape.
  explicit Array(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), T(0)) {
    check_shape();
  }

  /// Takes ownership of `data`; validates length and finiteness.
  Array(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    if (data_.size() != shape_size(shape_)) {
      throw DimensionError("array data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string(shape_));
    }
    if (!all_finite()) throw NumericError("array constructed with non-finite entries");
  }

  Array(Shape shape, std::initializer_list<T> data)
      : Array(std::move(shape), std::vector<T>(data)) {}

  static Array scalar(T value) { return Array(Shape{}, std::vector<T>{value}); }

  static Array filled(Shape shape, T value) {
    Array a(std::move(shape));
    a.fill(value);
    return a;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }
  const std::vector<T>& vec() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  T item() const {
    if (data_.size() != 1) throw DimensionError("item() on array of shape " + shape_string(shape_));
    return data_[0];
  }

  void fill(T value) {
    for (auto& x : data_) x = value;
  }

  bool all_finite() const {
    for (auto x : data_) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

  /// Same data, new shape of equal size.
  Array reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size()) {
      throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    Array out;
    out.shape_ = std::move(shape);
    out.data_ = data_;
    return out;
  }

  template <typename U>
  Array<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Array<U>(shape_, std::move(out));
  }

  friend bool operator==(const Array& a, const Array& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void check_shape() const {
    for (auto d : shape_) {
      if (d == 0) throw DimensionError("array dimensions must be positive: " + shape_string(shape_));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

}  // namespace lstp::tensor
