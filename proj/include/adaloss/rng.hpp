#pragma once

#include <cstdint>

#include "adaloss/matrix.hpp"

namespace adaloss {

/// Counter-based random stream: the k-th draw is a pure function of
/// (seed, k), so a stream can be replayed or split without shared state.
/// Sub-streams derive a new seed from a fixed offset and are independent
/// of the parent's position.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  /// Independent stream for replicate `index`.
  RngStream substream(std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double next_uniform();
  /// Standard normal via Box-Muller on two uniforms.
  double next_gaussian();
  /// Uniform integer in [0, n).
  std::uint64_t next_index(std::uint64_t n);
  /// Uniformly -1 or +1.
  double next_sign();

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

/// rows x cols of i.i.d. standard normals; pure function of (stream position,
/// shape). Throws DimensionError when a dimension is zero.
DenseMatrix sample_gaussian_matrix(std::size_t rows, std::size_t cols, RngStream& stream);

Vector sample_gaussian_vector(std::size_t n, RngStream& stream);

/// Uniform point on the sphere of radius `radius` centred at `center`.
Vector sample_sphere(const Vector& center, double radius, RngStream& stream);

}  // namespace adaloss
