#pragma once

#include <cstddef>

#include "sarqc/linalg.hpp"

namespace sarqc {

// Cached layer inputs X (d_in × n). The last `val_count` columns form the
// validation split; the rest are the training split.
struct CalibrationBatch {
  linalg::Matrix x;
  std::size_t val_count = 0;

  CalibrationBatch() = default;
  CalibrationBatch(linalg::Matrix inputs, double val_fraction);

  std::size_t d_in() const { return x.rows(); }
  std::size_t n() const { return x.cols(); }
  std::size_t train_count() const { return n() - val_count; }

  linalg::Matrix train() const { return x.block(0, 0, x.rows(), train_count()); }
  linalg::Matrix val() const { return x.block(0, train_count(), x.rows(), val_count); }
};

// ⌈f·n⌉ clamped to [1, n − 1]; requires n >= 2 and f in (0, 1).
std::size_t validation_count(std::size_t n, double val_fraction);

}  // namespace sarqc
