// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "relmatch/error.hpp"

namespace relmatch::ad {

using Shape = std::vector<std::size_t>;

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major tensor with an optional gradient slot of the same shape.
///
/// Every operation in this library views a tensor as a matrix: the last
/// dimension is the column count and all leading dimensions are folded into
/// rows, so a rank-1 tensor of length n is a 1 x n row.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(validated(std::move(shape))), values_(numel(shape_), T{0}) {}

  Tensor(Shape shape, std::vector<T> values) : shape_(validated(std::move(shape))), values_(std::move(values)) {
    if (values_.size() != numel(shape_)) {
      throw ShapeError("tensor of shape " + to_string(shape_) + " needs " + std::to_string(numel(shape_)) +
                       " values, got " + std::to_string(values_.size()));
    }
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<T> values) {
    return Tensor({rows, cols}, std::move(values));
  }

  static Tensor scalar(T v) { return Tensor({1}, {v}); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }
  std::size_t rows() const { return shape_.empty() ? 0 : values_.size() / shape_.back(); }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }
  T& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  const T& at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  T item() const {
    if (values_.size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape_));
    return values_[0];
  }

  bool has_grad() const { return !grad_.empty(); }

  /// Allocates a zero gradient on first use.
  std::span<T> grad() {
    if (grad_.empty()) grad_.assign(values_.size(), T{0});
    return grad_;
  }
  std::span<const T> grad() const { return grad_; }

  void zero_grad() { std::fill(grad_.begin(), grad_.end(), T{0}); }
  void clear_grad() {
    grad_.clear();
    grad_.shrink_to_fit();
  }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v); });
  }

  /// Same shape, same value bits. Gradients are not compared.
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  static Shape validated(Shape shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (std::size_t d : shape) {
      if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + to_string(shape));
    }
    return shape;
  }

  Shape shape_;
  std::vector<T> values_;
  std::vector<T> grad_;
};

}  // namespace relmatch::ad
