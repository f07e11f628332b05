#pragma once

#include <cstdint>
#include <random>

namespace sarqc {

// Named sub-streams: every consumer derives its generator from the master
// seed, a fixed stream id and an index, so results do not depend on
// scheduling.
enum class Stream : std::uint64_t {
  Compensation = 1,
  Supportedness = 2,
  Hoeffding = 3,
  GptqEquiv = 4,
  Scalarization = 5,
  LayerWeights = 10,
  LayerOutliers = 11,
  ActivationModel = 12,
  Calibration = 13,
  Heldout = 14,
  CovarianceShift = 15,
};

inline std::mt19937_64 make_rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace sarqc
