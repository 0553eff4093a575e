#include "adaloss/eigen_sym.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace adaloss {

namespace {

constexpr double kSymmetryTol = 1e-12;  // absolute, on max |A_ij - A_ji|

double hypot2(double a, double b) { return std::sqrt(a * a + b * b); }

void check_input(const DenseMatrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0)
    throw DimensionError("sym_eigendecompose: matrix must be square and non-empty");
  if (!a.all_finite())
    throw DimensionError("sym_eigendecompose: matrix has non-finite entries");
  if (max_asymmetry(a) > kSymmetryTol)
    throw DimensionError("sym_eigendecompose: matrix is not symmetric within 1e-12");
}

// Householder reduction to tridiagonal form. On exit d holds the diagonal,
// e the subdiagonal in e[1..n-1]; if accumulate is set, v holds the
// orthogonal reduction matrix, otherwise v is untouched.
void tridiagonalize(DenseMatrix& v, std::vector<double>& d, std::vector<double>& e,
                    bool accumulate) {
  const std::size_t n = d.size();
  for (std::size_t j = 0; j < n; ++j) d[j] = v(n - 1, j);

  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
        v(j, i) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h = h - f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;

      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        v(j, i) = f;
        g = e[j] + v(j, j) * f;
        for (std::size_t k = j + 1; k <= i - 1; ++k) {
          g += v(k, j) * d[k];
          e[k] += v(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (std::size_t k = j; k <= i - 1; ++k) v(k, j) -= (f * e[k] + g * d[k]);
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  if (accumulate) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      v(n - 1, i) = v(i, i);
      v(i, i) = 1.0;
      const double h = d[i + 1];
      if (h != 0.0) {
        for (std::size_t k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
        for (std::size_t j = 0; j <= i; ++j) {
          double g = 0.0;
          for (std::size_t k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
          for (std::size_t k = 0; k <= i; ++k) v(k, j) -= g * d[k];
        }
      }
      for (std::size_t k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
    }
    for (std::size_t j = 0; j < n; ++j) {
      d[j] = v(n - 1, j);
      v(n - 1, j) = 0.0;
    }
    v(n - 1, n - 1) = 1.0;
  } else {
    // Without accumulation the reduced diagonal is still sitting on the
    // diagonal of the worked-on copy.
    for (std::size_t j = 0; j < n; ++j) d[j] = v(j, j);
  }
  e[0] = 0.0;
}

// Implicit-shift QL on the tridiagonal (d, e); rotations are applied to the
// columns of v when accumulate is set.
void ql_implicit(DenseMatrix& v, std::vector<double>& d, std::vector<double>& e,
                 bool accumulate) {
  const std::size_t n = d.size();
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0;
  double tst1 = 0.0;
  const double eps = std::numeric_limits<double>::epsilon();
  // The per-eigenvalue sweep cap; 100n total sweeps bounds the whole pass.
  const std::size_t max_iter = std::max<std::size_t>(100, 100 * n);
  std::size_t total_iter = 0;

  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n - 1) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }

    if (m > l) {
      do {
        if (++total_iter > max_iter)
          throw ConvergenceError("sym_eigendecompose: QL iteration cap exceeded");

        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = hypot2(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0;
        double c2 = c;
        double c3 = c;
        const double el1 = e[l + 1];
        double s = 0.0;
        double s2 = 0.0;
        for (std::size_t i = m - 1; i + 1 > l; --i) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = hypot2(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);

          if (accumulate) {
            for (std::size_t k = 0; k < n; ++k) {
              h = v(k, i + 1);
              v(k, i + 1) = s * v(k, i) + c * h;
              v(k, i) = c * v(k, i) - s * h;
            }
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] = d[l] + f;
    e[l] = 0.0;
  }
}

void sort_descending(std::vector<double>& d, DenseMatrix* v) {
  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });
  std::vector<double> ds(n);
  for (std::size_t i = 0; i < n; ++i) ds[i] = d[order[i]];
  d = std::move(ds);
  if (v != nullptr) {
    DenseMatrix sorted(n, n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) sorted(i, j) = (*v)(i, order[j]);
    *v = std::move(sorted);
  }
}

}  // namespace

SpectralDecomposition sym_eigendecompose(const DenseMatrix& a) {
  check_input(a);
  const std::size_t n = a.rows();
  SpectralDecomposition out;
  out.basis = a;
  out.eigenvalues.assign(n, 0.0);
  std::vector<double> e(n, 0.0);
  tridiagonalize(out.basis, out.eigenvalues, e, /*accumulate=*/true);
  ql_implicit(out.basis, out.eigenvalues, e, /*accumulate=*/true);
  sort_descending(out.eigenvalues, &out.basis);
  return out;
}

std::vector<double> sym_eigenvalues(const DenseMatrix& a) {
  check_input(a);
  const std::size_t n = a.rows();
  DenseMatrix work = a;
  std::vector<double> d(n, 0.0), e(n, 0.0);
  tridiagonalize(work, d, e, /*accumulate=*/false);
  ql_implicit(work, d, e, /*accumulate=*/false);
  sort_descending(d, nullptr);
  return d;
}

std::pair<double, double> spectral_extremes(const DenseMatrix& a) {
  auto vals = sym_eigenvalues(a);
  return {vals.front(), vals.back()};
}

}  // namespace adaloss
