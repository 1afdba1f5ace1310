#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "taskforge/errors.hpp"

namespace taskforge {

// Dense row-major float32 tensor. Values flowing through diagrams are rank-2
// [batch, dim]; parameter blocks are rank-1. Reductions over tensor contents
// accumulate in float64.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape)
      : shape_(std::move(shape)), data_(count_of(shape_), 0.0f) {}
  Tensor(std::vector<int> shape, std::vector<float> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != count_of(shape_))
      fail("ShapeMismatch", "tensor data does not match shape");
  }

  static Tensor row(std::vector<float> v) {
    int d = int(v.size());
    return Tensor({1, d}, std::move(v));
  }
  static Tensor zeros(int rows, int cols) { return Tensor({rows, cols}); }
  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  const std::vector<int>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  int rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
  int cols() const {
    return shape_.size() == 2 ? shape_[1] : int(data_.size());
  }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  float& at(int r, int c) { return data_[std::size_t(r) * cols() + c]; }
  float at(int r, int c) const { return data_[std::size_t(r) * cols() + c]; }
  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  bool all_finite() const {
    for (float v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i)
      s += (i ? "," : "") + std::to_string(shape_[i]);
    return s + "]";
  }

private:
  static std::size_t count_of(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
      if (d < 0) fail("ShapeMismatch", "negative dimension");
      n *= std::size_t(d);
    }
    return shape.empty() ? 0 : n;
  }

  std::vector<int> shape_;
  std::vector<float> data_;
};

} // namespace taskforge
