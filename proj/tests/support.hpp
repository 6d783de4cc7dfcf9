// Seeded generators and small oracles shared by the test binaries.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include <Eigen/Dense>

#include "sympmor/benchmarks.hpp"
#include "sympmor/symplectic.hpp"

namespace testing {

using sympmor::Matrix;
using sympmor::Vector;

/// SplitMix64: tiny, seedable and identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) { return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1)); }

  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  Vector vector(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  Matrix matrix(Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = normal();
    return m;
  }

 private:
  std::uint64_t state_;
};

/// Random ortho-symplectic basis of 2k columns in R^2n, by symplectic
/// Gram-Schmidt on random vectors.
inline sympmor::OrthoSymplecticBasis<double> random_basis(Rng& rng, Eigen::Index n, Eigen::Index k) {
  sympmor::OrthoSymplecticBasis<double> basis;
  while (basis.k() < k) {
    auto e = sympmor::symplectic_gram_schmidt<double>(rng.vector(2 * n), basis);
    if (e) basis.append(*e);
  }
  return basis;
}

/// Random symmetric PSD matrix of the given rank.
inline Matrix random_psd(Rng& rng, Eigen::Index n, Eigen::Index rank, double scale = 1.0) {
  const Matrix b = rng.matrix(n, rank);
  return scale * b * b.transpose() / static_cast<double>(rank);
}

/// Well-conditioned random matrix (identity plus a small perturbation).
inline Matrix random_factor(Rng& rng, Eigen::Index n, double spread = 0.3) {
  return Matrix::Identity(n, n) + spread * rng.matrix(n, n) / std::sqrt(static_cast<double>(n));
}

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

/// Desk-scale wave run reused by several tests.
inline sympmor::Benchmark desk_wave(int n = 100) {
  sympmor::WaveConfig c;
  c.n = n;
  return sympmor::build_wave(c);
}

}  // namespace testing
