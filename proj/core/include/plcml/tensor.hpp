#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace plcml {

// Dense row-major matrix of doubles. Kept deliberately small: the library
// works with explicit loops rather than an expression-template framework.
struct Tensor2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
  std::size_t size() const { return data.size(); }
  bool all_finite() const;
};

// c = a * b
Tensor2 matmul(const Tensor2& a, const Tensor2& b);
// c = a^T * b
Tensor2 matmul_ta(const Tensor2& a, const Tensor2& b);
// c = a * b^T
Tensor2 matmul_tb(const Tensor2& a, const Tensor2& b);
Tensor2 transpose(const Tensor2& a);

// Picks the listed rows of a, in order.
Tensor2 take_rows(const Tensor2& a, const std::vector<std::size_t>& idx);

double squared_distance(std::span<const double> a, std::span<const double> b);
double euclidean_distance(std::span<const double> a, std::span<const double> b);

}  // namespace plcml
