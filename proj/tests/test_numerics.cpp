#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "adaloss/eigen_sym.hpp"
#include "adaloss/matrix.hpp"
#include "adaloss/rng.hpp"

using namespace adaloss;

namespace {

// Independent 2x2 oracle: eigenvalues from the characteristic polynomial.
std::pair<double, double> eig2x2_quadratic(double a, double b, double d) {
  const double tr = a + d;
  const double det = a * d - b * b;
  const double disc = std::sqrt(tr * tr / 4.0 - det);
  return {tr / 2.0 + disc, tr / 2.0 - disc};
}

DenseMatrix random_symmetric(std::size_t n, RngStream& rng) {
  DenseMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double v = rng.next_gaussian();
      a(i, j) = v;
      a(j, i) = v;
    }
  return a;
}

double reconstruction_error(const DenseMatrix& a, const SpectralDecomposition& dec) {
  const std::size_t n = a.rows();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double rec = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        rec += dec.basis(i, k) * dec.eigenvalues[k] * dec.basis(j, k);
      num += (rec - a(i, j)) * (rec - a(i, j));
      den += a(i, j) * a(i, j);
    }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

}  // namespace

TEST_CASE("identity eigendecomposition") {
  const auto dec = sym_eigendecompose(DenseMatrix::identity(3));
  for (double v : dec.eigenvalues) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(reconstruction_error(DenseMatrix::identity(3), dec) < 1e-10);
}

TEST_CASE("scaled identity extremes") {
  DenseMatrix half = DenseMatrix::identity(5);
  for (auto& v : half.data()) v *= 0.5;
  const auto [mx, mn] = spectral_extremes(half);
  CHECK(mx == doctest::Approx(0.5));
  CHECK(mn == doctest::Approx(0.5));
}

TEST_CASE("diagonal matrix eigenvalues sorted descending") {
  DenseMatrix a(2, 2);
  a(0, 0) = 3.0;
  a(1, 1) = 1.0;
  const auto dec = sym_eigendecompose(a);
  CHECK(dec.eigenvalues[0] == doctest::Approx(3.0));
  CHECK(dec.eigenvalues[1] == doctest::Approx(1.0));

  DenseMatrix b(3, 3);
  b(0, 0) = 2.8;
  b(1, 1) = 1.0;
  b(2, 2) = 0.19;
  const auto [mx, mn] = spectral_extremes(b);
  CHECK(mx == doctest::Approx(2.8));
  CHECK(mn == doctest::Approx(0.19));
}

TEST_CASE("random symmetric 2x2 matches the quadratic-formula oracle") {
  RngStream rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = rng.next_gaussian();
    const double b = rng.next_gaussian();
    const double d = rng.next_gaussian();
    DenseMatrix m(2, 2);
    m(0, 0) = a;
    m(0, 1) = b;
    m(1, 0) = b;
    m(1, 1) = d;
    const auto [hi, lo] = eig2x2_quadratic(a, b, d);
    const auto dec = sym_eigendecompose(m);
    const double scale = std::max({std::abs(hi), std::abs(lo), 1.0});
    CHECK(std::abs(dec.eigenvalues[0] - hi) / scale < 1e-10);
    CHECK(std::abs(dec.eigenvalues[1] - lo) / scale < 1e-10);
  }
}

TEST_CASE("reconstruction and orthonormality on larger random matrices") {
  RngStream rng(11);
  for (std::size_t n : {5u, 23u, 60u}) {
    const DenseMatrix a = random_symmetric(n, rng);
    const auto dec = sym_eigendecompose(a);
    CHECK(reconstruction_error(a, dec) < 1e-8);
    // V^T V = I to 1e-10 entrywise
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        double ip = 0.0;
        for (std::size_t k = 0; k < n; ++k) ip += dec.basis(k, i) * dec.basis(k, j);
        CHECK(std::abs(ip - (i == j ? 1.0 : 0.0)) < 1e-10);
      }
    // A v_k = lambda_k v_k to 1e-8 relative
    for (std::size_t k = 0; k < n; ++k) {
      Vector v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = dec.basis(i, k);
      const Vector av = matvec(a, v);
      double worst = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        worst = std::max(worst, std::abs(av[i] - dec.eigenvalues[k] * v[i]));
      const double scale = std::max(std::abs(dec.eigenvalues[k]), 1.0);
      CHECK(worst / scale < 1e-8);
    }
    // values-only path agrees with the full decomposition
    const auto vals = sym_eigenvalues(a);
    for (std::size_t k = 0; k < n; ++k)
      CHECK(vals[k] == doctest::Approx(dec.eigenvalues[k]).epsilon(1e-10));
  }
}

TEST_CASE("asymmetric input rejected") {
  DenseMatrix a(2, 2);
  a(0, 1) = 1.0;  // a(1,0) stays 0
  CHECK_THROWS_AS(sym_eigendecompose(a), DimensionError);
  DenseMatrix b(2, 3);
  CHECK_THROWS_AS(sym_eigendecompose(b), DimensionError);
}

TEST_CASE("gaussian sampling is deterministic and seed sensitive") {
  RngStream s1(42), s2(42), s3(43);
  const auto a = sample_gaussian_matrix(2, 2, s1);
  const auto b = sample_gaussian_matrix(2, 2, s2);
  const auto c = sample_gaussian_matrix(3, 4, s3);
  CHECK(a.data() == b.data());
  RngStream s4(42);
  const auto d = sample_gaussian_matrix(3, 4, s4);
  CHECK(c.data() != d.data());
  CHECK_THROWS_AS(sample_gaussian_matrix(0, 2, s1), DimensionError);
}

TEST_CASE("gaussian sample moments (law of large numbers)") {
  RngStream rng(123);
  const auto m = sample_gaussian_matrix(10000, 1, rng);
  double mean = 0.0;
  for (double v : m.data()) mean += v;
  mean /= 10000.0;
  double var = 0.0;
  for (double v : m.data()) var += (v - mean) * (v - mean);
  var /= 9999.0;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("substreams differ from the parent and from each other") {
  RngStream root(5);
  auto s0 = root.substream(0);
  auto s1 = root.substream(1);
  CHECK(s0.next_u64() != s1.next_u64());
  CHECK(root.substream(0).next_u64() == root.substream(0).next_u64());
}

TEST_CASE("normalize_rows") {
  DenseMatrix a(1, 2);
  a(0, 0) = 3.0;
  a(0, 1) = 4.0;
  const auto u = normalize_rows(a);
  CHECK(u(0, 0) == doctest::Approx(0.6));
  CHECK(u(0, 1) == doctest::Approx(0.8));

  // idempotence and unit norms on a random matrix
  RngStream rng(9);
  const auto x = normalize_rows(sample_gaussian_matrix(5, 7, rng));
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(norm2(x.row(i)) - 1.0) < 1e-12);
  const auto xx = normalize_rows(x);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 7; ++j) CHECK(xx(i, j) == doctest::Approx(x(i, j)));

  DenseMatrix z(2, 2);
  z(0, 0) = 1.0;  // second row is zero
  CHECK_THROWS_AS(normalize_rows(z), DegenerateInputError);
}

TEST_CASE("matmul agrees with naive reference") {
  RngStream rng(3);
  const auto a = sample_gaussian_matrix(7, 5, rng);
  const auto b = sample_gaussian_matrix(5, 6, rng);
  const auto c = matmul(a, b);
  const auto cnt = matmul_nt(a, b.transposed());
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      double ref = 0.0;
      for (std::size_t k = 0; k < 5; ++k) ref += a(i, k) * b(k, j);
      CHECK(c(i, j) == doctest::Approx(ref).epsilon(1e-12));
      CHECK(cnt(i, j) == doctest::Approx(ref).epsilon(1e-12));
    }
}
