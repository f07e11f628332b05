#include "sarqc/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sarqc/error.hpp"

namespace sarqc {

std::size_t validation_count(std::size_t n, double val_fraction) {
  if (n < 2) throw InvalidArgument("calibration batch needs at least 2 samples");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw InvalidArgument("val_fraction must lie in (0, 1)");
  }
  const auto raw = static_cast<std::size_t>(std::ceil(val_fraction * static_cast<double>(n)));
  return std::clamp<std::size_t>(raw, 1, n - 1);
}

CalibrationBatch::CalibrationBatch(linalg::Matrix inputs, double val_fraction)
    : x(std::move(inputs)), val_count(validation_count(x.cols(), val_fraction)) {}

}  // namespace sarqc
