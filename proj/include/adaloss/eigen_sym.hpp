#pragma once

#include <utility>
#include <vector>

#include "adaloss/matrix.hpp"

namespace adaloss {

struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Eigendecomposition of a symmetric matrix: A = V diag(lambda) V^T with
/// eigenvalues sorted descending and the columns of `basis` orthonormal.
struct SpectralDecomposition {
  std::vector<double> eigenvalues;
  DenseMatrix basis;

  double lambda_max() const { return eigenvalues.front(); }
  double lambda_min() const { return eigenvalues.back(); }
};

/// Householder tridiagonalization followed by implicit-shift QL.
/// Requires a square matrix, symmetric to 1e-12 (absolute, entrywise), all
/// entries finite. Throws DimensionError on bad input and ConvergenceError
/// if QL fails to converge within the iteration cap.
SpectralDecomposition sym_eigendecompose(const DenseMatrix& a);

/// Eigenvalues only (descending); same reduction without accumulating the
/// basis, which is considerably cheaper for large matrices.
std::vector<double> sym_eigenvalues(const DenseMatrix& a);

/// (lambda_max, lambda_min) of a symmetric PSD matrix.
std::pair<double, double> spectral_extremes(const DenseMatrix& a);

}  // namespace adaloss
