#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "bailcnn/errors.hpp"

namespace bailcnn {

/// Dense row-major tensor. T is float for training and double for
/// gradient checking; nothing here allocates once the shape is set.
template <typename T>
struct Tensor {
  std::vector<size_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<size_t> dims)
      : shape(std::move(dims)), data(numel_of(shape), T(0)) {}
  Tensor(std::initializer_list<size_t> dims)
      : Tensor(std::vector<size_t>(dims)) {}

  static size_t numel_of(const std::vector<size_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), size_t{1},
                           [](size_t a, size_t b) { return a * b; });
  }

  size_t numel() const { return data.size(); }
  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  void fill(T value) { std::fill(data.begin(), data.end(), value); }

  bool all_finite() const {
    for (T v : data) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape);
    for (size_t i = 0; i < data.size(); ++i) {
      out.data[i] = static_cast<U>(data[i]);
    }
    return out;
  }
};

inline std::string shape_string(const std::vector<size_t>& shape) {
  std::string out = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  out += "]";
  return out;
}

}  // namespace bailcnn
