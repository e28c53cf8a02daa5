#pragma once

#include "plcml/tensor.hpp"

namespace plcml {

// Full eigendecomposition of a symmetric matrix (cyclic Jacobi).
// Eigenvalues sorted descending; vectors.col(j) pairs with values[j].
struct SymEig {
  std::vector<double> values;
  Tensor2 vectors;  // D x D, column j is the j-th eigenvector
};

SymEig sym_eig(const Tensor2& a, int max_sweeps = 64, double tol = 1e-13);

}  // namespace plcml
