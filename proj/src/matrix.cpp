#include "adaloss/matrix.hpp"

#include <cmath>

#include "adaloss/parallel.hpp"

namespace adaloss {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("DenseMatrix: data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows_) + "x" +
                         std::to_string(cols_));
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool DenseMatrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double dot(std::span<const double> a, std::span<const double> b) {
  // Four accumulators so the reduction does not serialize on one add chain.
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t n = a.size();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < n; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

double norm2_squared(std::span<const double> v) { return dot(v, v); }

double norm2(std::span<const double> v) { return std::sqrt(norm2_squared(v)); }

Vector operator-(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionError("vector subtraction: size mismatch");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Vector matvec(const DenseMatrix& a, std::span<const double> x) {
  if (x.size() != a.cols()) throw DimensionError("matvec: dimension mismatch");
  Vector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

Vector matvec_transposed(const DenseMatrix& a, std::span<const double> x) {
  if (x.size() != a.rows()) throw DimensionError("matvec_transposed: dimension mismatch");
  Vector y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double xi = x[i];
    auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += xi * r[j];
  }
  return y;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: dimension mismatch");
  DenseMatrix c(a.rows(), b.cols());
  const std::size_t cols = b.cols();
  parallel_for(0, a.rows(), [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) {
      double* crow = c.row(i).data();
      for (std::size_t k = 0; k < a.cols(); ++k) {
        const double aik = a(i, k);
        const double* brow = b.row(k).data();
        for (std::size_t j = 0; j < cols; ++j) crow[j] += aik * brow[j];
      }
    }
  });
  return c;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) throw DimensionError("matmul_nt: dimension mismatch");
  DenseMatrix c(a.rows(), b.rows());
  parallel_for(0, a.rows(), [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) {
      for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(a.row(i), b.row(j));
    }
  });
  return c;
}

double max_asymmetry(const DenseMatrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("max_asymmetry: matrix not square");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j)
      worst = std::max(worst, std::abs(a(i, j) - a(j, i)));
  return worst;
}

DenseMatrix normalize_rows(const DenseMatrix& x) {
  DenseMatrix out = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double nrm = norm2(x.row(i));
    if (nrm == 0.0 || !std::isfinite(nrm)) {
      throw DegenerateInputError("normalize_rows: row " + std::to_string(i) +
                                 " has zero or non-finite norm");
    }
    auto r = out.row(i);
    for (double& v : r) v /= nrm;
  }
  return out;
}

}  // namespace adaloss
