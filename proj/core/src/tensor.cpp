#include "plcml/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace plcml {

bool Tensor2::all_finite() const {
  for (const double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: shape mismatch");
  Tensor2 c(a.rows, b.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.data.data() + i * a.cols;
    double* crow = c.data.data() + i * c.cols;
    for (std::size_t j = 0; j < a.cols; ++j) {
      const double aij = arow[j];
      if (aij == 0.0) continue;
      const double* brow = b.data.data() + j * b.cols;
      for (std::size_t k = 0; k < b.cols; ++k) crow[k] += aij * brow[k];
    }
  }
  return c;
}

Tensor2 matmul_ta(const Tensor2& a, const Tensor2& b) {
  if (a.rows != b.rows) throw std::invalid_argument("matmul_ta: shape mismatch");
  Tensor2 c(a.cols, b.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.data.data() + i * a.cols;
    const double* brow = b.data.data() + i * b.cols;
    for (std::size_t j = 0; j < a.cols; ++j) {
      const double aij = arow[j];
      if (aij == 0.0) continue;
      double* crow = c.data.data() + j * c.cols;
      for (std::size_t k = 0; k < b.cols; ++k) crow[k] += aij * brow[k];
    }
  }
  return c;
}

Tensor2 matmul_tb(const Tensor2& a, const Tensor2& b) {
  if (a.cols != b.cols) throw std::invalid_argument("matmul_tb: shape mismatch");
  Tensor2 c(a.rows, b.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.data.data() + i * a.cols;
    double* crow = c.data.data() + i * c.cols;
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* brow = b.data.data() + j * b.cols;
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
      crow[j] = acc;
    }
  }
  return c;
}

Tensor2 transpose(const Tensor2& a) {
  Tensor2 t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

Tensor2 take_rows(const Tensor2& a, const std::vector<std::size_t>& idx) {
  Tensor2 out(idx.size(), a.cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= a.rows) throw std::out_of_range("take_rows: bad index");
    const auto src = a.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("squared_distance: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

}  // namespace plcml
