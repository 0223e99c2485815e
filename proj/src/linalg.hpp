#pragma once

#include <vector>

#include "tensor.hpp"

namespace gmnmlab {

// Cyclic Jacobi eigendecomposition of a symmetric matrix [d,d].
// Returns eigenvalues (ascending) and the matrix of column eigenvectors.
// Intended for the small d (<= 8 or so) the spectral embedding works at.
struct EigenSym {
  std::vector<double> values;
  Tensor vectors;  // [d,d], column j is the eigenvector of values[j]
};
EigenSym eigh(const Tensor& a, double tol = 1e-13);

// Determinant and inverse of a small square matrix by Gaussian elimination
// with partial pivoting. Throws DataError on a singular matrix.
double det(const Tensor& a);
Tensor inverse(const Tensor& a);

bool is_symmetric(const Tensor& a, double tol = 0.0);

}  // namespace gmnmlab
