#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sarqc/linalg.hpp"
#include "sarqc/saliency.hpp"

namespace sarqc::objective {

struct LossBreakdown {
  double recon = 0.0;  // ‖(W − Ŵ)X‖²
  double sar = 0.0;    // ‖(Ŵ − W)S‖²
  double drift = 0.0;  // ‖Ŵ − W‖²
  std::optional<double> joint_normalized;
};

double recon_loss(const linalg::Matrix& w, const linalg::Matrix& w_hat, const linalg::Matrix& x);
double sar_loss(const linalg::Matrix& w, const linalg::Matrix& w_hat,
                const saliency::SaliencyProfile& s);
double weight_drift(const linalg::Matrix& w, const linalg::Matrix& w_hat);

LossBreakdown breakdown(const linalg::Matrix& w, const linalg::Matrix& w_hat,
                        const linalg::Matrix& x, const saliency::SaliencyProfile& s);

// (v − min)/(max − min); all zeros when max == min. Needs >= 2 values.
std::vector<double> minmax_normalize(std::span<const double> values);

// recon_n + λ·sar_n, element-wise.
std::vector<double> joint_score(std::span<const double> recon_n, std::span<const double> sar_n,
                                double lambda);

// Index of the smallest score; the lowest index wins ties.
std::size_t argmin_lowest(std::span<const double> scores);

}  // namespace sarqc::objective
