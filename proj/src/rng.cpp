#include "adaloss/rng.hpp"

#include <cmath>
#include <numbers>

namespace adaloss {

namespace {

// splitmix64 finalizer; the k-th output of the stream seeded with s is
// mix(s + (k+1) * GOLDEN).
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

RngStream RngStream::substream(std::uint64_t index) const {
  // Distinct fixed offset per replicate; the xor constant separates the
  // substream seed space from the raw draw sequence.
  return RngStream(mix(seed_ ^ 0xA5A5A5A55A5A5A5Aull) ^ mix((index + 1) * kGolden));
}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix(seed_ + counter_ * kGolden);
}

double RngStream::next_uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_gaussian() {
  // Box-Muller; u1 is bumped away from zero so the log stays finite.
  double u1 = next_uniform();
  double u2 = next_uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngStream::next_index(std::uint64_t n) {
  // Rejection sampling for an unbiased draw.
  const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % n;
}

double RngStream::next_sign() { return (next_u64() & 1u) ? 1.0 : -1.0; }

DenseMatrix sample_gaussian_matrix(std::size_t rows, std::size_t cols, RngStream& stream) {
  if (rows == 0 || cols == 0) throw DimensionError("sample_gaussian_matrix: zero dimension");
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = stream.next_gaussian();
  return m;
}

Vector sample_gaussian_vector(std::size_t n, RngStream& stream) {
  if (n == 0) throw DimensionError("sample_gaussian_vector: zero dimension");
  Vector v(n);
  for (double& x : v) x = stream.next_gaussian();
  return v;
}

Vector sample_sphere(const Vector& center, double radius, RngStream& stream) {
  Vector dir = sample_gaussian_vector(center.size(), stream);
  double nrm = norm2(dir);
  while (nrm == 0.0) {  // essentially never
    dir = sample_gaussian_vector(center.size(), stream);
    nrm = norm2(dir);
  }
  Vector out(center.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = center[i] + radius * dir[i] / nrm;
  return out;
}

}  // namespace adaloss
