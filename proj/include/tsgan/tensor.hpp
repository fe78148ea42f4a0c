#pragma once

#include <cmath>
#include <initializer_list>
#include <vector>

#include "tsgan/common.hpp"

namespace tsgan {

/// Dense real n-dimensional array, row-major. Rank 1..3 is what the ops use.
struct Tensor {
  Shape shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (shape_size(shape) != values.size())
      throw ShapeError("tensor: shape " + shape_str(shape) + " does not match " +
                       std::to_string(values.size()) + " values");
  }

  static Tensor zeros(Shape s) { return Tensor(std::move(s), {}, 0.0); }
  static Tensor full(Shape s, double fill) { return Tensor(std::move(s), {}, fill); }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor vec(std::vector<double> v) {
    Shape s{v.size()};
    return Tensor(std::move(s), std::move(v));
  }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
    return Tensor({rows, cols}, std::move(v));
  }
  static Tensor identity(std::size_t n) {
    Tensor t = zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) t.values[i * n + i] = 1.0;
    return t;
  }

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape[i]; }
  bool is_scalar() const { return size() == 1; }

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  // rank-2 access
  double& at(std::size_t r, std::size_t c) { return values[r * shape[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * shape[1] + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  Tensor(Shape s, std::vector<double>, double fill) : shape(std::move(s)) {
    values.assign(shape_size(shape), fill);
  }
};

}  // namespace tsgan
