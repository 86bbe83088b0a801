#ifndef OPFIELD_RANDOM_HPP
#define OPFIELD_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "opfield/core.hpp"

namespace opfield {

/// Seeded generator whose derived distributions are computed here rather than
/// by the standard library, so sequences match across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  Index index(Index n) { return static_cast<Index>(uniform() * static_cast<double>(n)); }

  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  Scalar complex_normal() {
    const double re = normal();
    const double im = normal();
    return {re, im};
  }

  VectorXc complex_vector(Index n) {
    VectorXc v(n);
    for (Index i = 0; i < n; ++i) v(i) = complex_normal();
    return v;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace opfield

#endif  // OPFIELD_RANDOM_HPP
