#pragma once

#include <optional>
#include <vector>

#include "sarqc/linalg.hpp"

namespace sarqc::saliency {

inline constexpr double kStatFloor = 1e-8;

// Per-input-channel statistics of a layer: column j of W, row j of X.
struct ChannelStats {
  std::vector<double> mean_abs_x;
  std::vector<double> mean_abs_w;
  std::vector<double> max_abs_x;
  std::vector<double> max_abs_w;

  std::size_t size() const { return mean_abs_x.size(); }
};

enum class ProfileKind { Identity, GS, GBS };

// Diagonal of S in the saliency-aware regularizer ‖ΔW·S‖².
struct SaliencyProfile {
  std::vector<double> values;
  ProfileKind kind = ProfileKind::Identity;
  std::optional<double> gamma;  // GBS only
  std::optional<double> h_bar;  // set by scale_normalize_gbs

  static SaliencyProfile identity(std::size_t d_in);
  std::size_t size() const { return values.size(); }
};

// Statistics floored at kStatFloor. W is d_out × d_in, X is d_in × n.
ChannelStats channel_stats(const linalg::Matrix& w, const linalg::Matrix& x);

// Candidate-generating scaling s̃(α) = mean|X|^α / mean|W|^(1−α),
// divided by sqrt(max·min) of the raw vector.
std::vector<double> scaling_vector_gs(const ChannelStats& stats, double alpha);

// Fixed grid-search saliency mean|X| / mean|W|.
SaliencyProfile saliency_vector_gs(const ChannelStats& stats);

// mean|X|^γ / mean|W|^(1−γ), not normalized.
std::vector<double> saliency_vector_gbs(const ChannelStats& stats, double gamma);

// sqrt(h̄)·s / sqrt(mean(s²)); the result satisfies mean(values²) = h̄.
SaliencyProfile scale_normalize_gbs(const std::vector<double>& s, double h_bar,
                                    std::optional<double> gamma = std::nullopt);

}  // namespace sarqc::saliency
