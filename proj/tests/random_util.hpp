#pragma once

#include <random>

#include "dissnet/linalg.hpp"

namespace testutil {

inline dissnet::DenseMatrix gaussian(std::mt19937& rng, int r, int c, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  dissnet::DenseMatrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

inline dissnet::DenseMatrix random_symmetric(std::mt19937& rng, int n, double scale = 1.0) {
  const dissnet::DenseMatrix g = gaussian(rng, n, n, scale);
  return 0.5 * (g + g.transpose());
}

/// G'G + shift*I.
inline dissnet::DenseMatrix random_spd(std::mt19937& rng, int n, double shift = 0.1) {
  const dissnet::DenseMatrix g = gaussian(rng, n, n);
  return g.transpose() * g + shift * dissnet::DenseMatrix::Identity(n, n);
}

inline int uniform_int(std::mt19937& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double uniform(std::mt19937& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace testutil
