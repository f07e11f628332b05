#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sarqc/calibration.hpp"
#include "sarqc/linalg.hpp"
#include "sarqc/quantizer.hpp"
#include "sarqc/saliency.hpp"

// Gram-based sequential quantization with a saliency-aware regularized
// curvature (SARQC-GBS). With λ = 0 this is undamped GPTQ.
namespace sarqc::gbs {

std::vector<double> default_lambda_grid();  // {0.25, 0.5, 0.75}
std::vector<double> default_gamma_grid();   // {0.1, 0.15, 0.35, 0.5}

enum class SaliencyKind { Identity, GBS };

struct GbsConfig {
  std::vector<double> lambda_grid = default_lambda_grid();
  std::vector<double> gamma_grid = default_gamma_grid();
  std::size_t block_size = 128;
  SaliencyKind saliency_kind = SaliencyKind::GBS;
  quant::QuantScheme scheme;
  double subset_fraction = 0.25;
  std::size_t min_subset = 32;
  double val_fraction = 0.25;

  void validate() const;
};

// G = XXᵀ + λ·diag(S²) and M = chol(G⁻¹)ᵀ.
struct CurvatureFactor {
  linalg::Matrix g;
  linalg::TriangularFactor m;
  double lambda = 0.0;
  double h_bar = 0.0;
  double jitter_used = 0.0;
};

// An Identity profile is expanded to the isotropic sqrt(h̄) profile, so
// G = XXᵀ + λ·h̄·I. Other profiles are used as given.
CurvatureFactor build_curvature(const linalg::Matrix& x, const saliency::SaliencyProfile& s,
                                double lambda);

// GBS saliency s(γ) for (W, X), scale-normalized with h̄ = mean(diag(XXᵀ)).
saliency::SaliencyProfile gbs_profile(const linalg::Matrix& w, const linalg::Matrix& x,
                                      double gamma);

// Sequential quantization with closed-form compensation. Group scales are
// fitted on the original W and held fixed during the pass. Rows are
// independent; `jobs` > 1 processes them on worker threads.
quant::QuantizedLayer run_gbs(const linalg::Matrix& w, const CurvatureFactor& curv,
                              const quant::QuantScheme& scheme, std::size_t block_size,
                              std::size_t jobs = 1);

// One committed coordinate of an unblocked row pass.
struct CompensationStep {
  std::size_t column = 0;
  double residual = 0.0;       // u_j − ŵ_j before commitment
  std::vector<double> update;  // change applied to u[j..d) (update[0] = −residual)
};

// Unblocked (B = 1) pass over one row recording every compensation step.
std::vector<CompensationStep> trace_row(std::span<const double> w_row,
                                        const linalg::TriangularFactor& m,
                                        std::span<const quant::GroupParams> params,
                                        const quant::QuantScheme& scheme);

// Closed-form constrained minimizer for fixing coordinate j with error e:
// Δw = −(e / M̄_jj)·M̄[:, j], objective increment e²/(2·M̄_jj), M̄ = G⁻¹.
struct RowUpdate {
  std::vector<double> delta;
  double objective = 0.0;
};
RowUpdate closed_form_update(const linalg::Matrix& g_inverse, std::size_t j, double e);

struct HparamEntry {
  double lambda = 0.0;
  double gamma = 0.0;
  double val_loss = 0.0;
};

struct GbsSelection {
  double lambda = 0.0;
  double gamma = 0.0;
  quant::QuantizedLayer layer;
  CurvatureFactor curvature;
  std::vector<HparamEntry> table;
};

// max(min_subset, ⌈f·d_in⌉), capped at d_in.
std::size_t subset_size(std::size_t d_in, const GbsConfig& config);

// Searches (λ, γ) on the lowest-index channel block using the train split,
// scores on the validation split, then re-runs the best pair on the full
// layer. Ties go to the smaller λ, then the smaller γ.
GbsSelection select_hparams_gbs(const linalg::Matrix& w, const CalibrationBatch& batch,
                                const GbsConfig& config, std::size_t jobs = 1);

}  // namespace sarqc::gbs
