#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sarqc/calibration.hpp"
#include "sarqc/linalg.hpp"
#include "sarqc/objective.hpp"
#include "sarqc/quantizer.hpp"
#include "sarqc/saliency.hpp"

// Grid search over channel scaling factors with a saliency-aware
// regularizer (SARQC-GS). λ = 0 is the AWQ-style baseline.
namespace sarqc::gs {

std::vector<double> default_alpha_grid();   // {k/20 : k = 0..20}
std::vector<double> default_lambda_grid();  // {0.1, 0.2, ..., 1.0}

enum class SaliencyKind { Identity, GS };

struct GsConfig {
  std::vector<double> alpha_grid = default_alpha_grid();
  double lambda = 0.0;
  std::vector<double> lambda_grid = default_lambda_grid();
  SaliencyKind saliency_kind = SaliencyKind::GS;
  quant::QuantScheme scheme;
  double val_fraction = 0.25;

  void validate() const;
};

struct GsResult {
  double chosen_alpha = 0.0;
  double chosen_lambda = 0.0;
  quant::QuantizedLayer layer;
  std::vector<objective::LossBreakdown> losses;  // one per grid point
  std::vector<double> recon_n;
  std::vector<double> sar_n;
  std::size_t selected_index = 0;
  // (λ, validation recon loss), filled by select_lambda_gs.
  std::vector<std::pair<double, double>> validation_table;
};

// Ŵ(α) = Q(W·diag(s̃(α)))·diag(s̃(α))⁻¹.
quant::QuantizedLayer candidate(const linalg::Matrix& w, const saliency::ChannelStats& stats,
                                double alpha, const quant::QuantScheme& scheme);

// Index minimizing min–max normalized recon + λ·sar over the grid.
std::size_t select_candidate(std::span<const double> recon, std::span<const double> sar,
                             double lambda, std::vector<double>* recon_n = nullptr,
                             std::vector<double>* sar_n = nullptr);

// All candidates and their raw losses on the given calibration inputs.
struct CandidateSet {
  std::vector<quant::QuantizedLayer> layers;
  std::vector<objective::LossBreakdown> losses;
};
CandidateSet build_candidates(const linalg::Matrix& w, const linalg::Matrix& x_train,
                              const GsConfig& config);

// One SARQC-GS pass at config.lambda on the training inputs.
GsResult run_gs(const linalg::Matrix& w, const linalg::Matrix& x_train, const GsConfig& config);

// Runs run_gs for every λ in the grid on the training split and keeps the
// result with the smallest reconstruction loss on the validation split.
GsResult select_lambda_gs(const linalg::Matrix& w, const CalibrationBatch& batch,
                          const GsConfig& config);

}  // namespace sarqc::gs
