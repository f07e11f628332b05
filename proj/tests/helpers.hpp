#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "sarqc/linalg.hpp"

namespace testutil {

inline sarqc::linalg::Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c,
                                           double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  sarqc::linalg::Matrix m(r, c);
  for (double& v : m.data()) v = nd(rng);
  return m;
}

// A·Aᵀ + shift·I, well conditioned for shift > 0.
inline sarqc::linalg::Matrix random_spd(std::mt19937_64& rng, std::size_t d, double shift = 0.1) {
  const auto a = random_matrix(rng, d, d);
  auto g = sarqc::linalg::matmul(a, a.transpose());
  for (std::size_t i = 0; i < d; ++i) g(i, i) += shift;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < i; ++j) g(j, i) = g(i, j);
  }
  return g;
}

inline double max_abs_diff(const sarqc::linalg::Matrix& a, const sarqc::linalg::Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

inline std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace testutil
