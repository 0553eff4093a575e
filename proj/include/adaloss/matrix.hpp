#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace adaloss {

using Vector = std::vector<double>;

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DegenerateInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major matrix of doubles. Storage is a flat vector of
/// rows*cols entries; all entries are expected to stay finite.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool all_finite() const;
  DenseMatrix transposed() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);         // Euclidean norm
double norm2_squared(std::span<const double> v);

Vector operator-(const Vector& a, const Vector& b);

/// y = A x
Vector matvec(const DenseMatrix& a, std::span<const double> x);
/// y = A^T x
Vector matvec_transposed(const DenseMatrix& a, std::span<const double> x);

/// C = A * B (row-major, inner dimension a.cols() == b.rows()).
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// C = A * B^T; both operands are traversed along contiguous rows.
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

/// Max |A_ij - A_ji|; zero for a symmetric matrix.
double max_asymmetry(const DenseMatrix& a);

/// Scales every row to unit Euclidean norm. Throws DegenerateInputError on a
/// zero row.
DenseMatrix normalize_rows(const DenseMatrix& x);

}  // namespace adaloss
