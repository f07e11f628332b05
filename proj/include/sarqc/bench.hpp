#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sarqc/calibration.hpp"
#include "sarqc/linalg.hpp"
#include "sarqc/objective.hpp"
#include "sarqc/quantizer.hpp"
#include "sarqc/saliency.hpp"

namespace sarqc::bench {

// Synthetic layer plus the activation model its inputs are drawn from.
// Activations are x = diag(σ)·(B·z + noise·ε) with a low-rank mixing B,
// log-normal channel scales σ and a few activation outlier channels.
struct SynthLayerSpec {
  std::size_t d_out = 64;
  std::size_t d_in = 128;
  std::size_t outlier_channels = 4;
  double outlier_scale = 10.0;
  double weight_std = 1.0;
  std::uint64_t seed = 7;

  std::size_t act_rank = 16;
  double act_noise = 1.0;
  std::size_t act_outlier_channels = 4;
  double act_outlier_scale = 6.0;

  std::size_t n_calib = 128;
  std::size_t n_heldout = 2048;
  double m_x = std::numeric_limits<double>::infinity();

  void validate() const;
};

// Gaussian(0, weight_std²) weights; designated outlier input channels are
// multiplied by outlier_scale.
linalg::Matrix gen_layer(const SynthLayerSpec& spec);
std::vector<std::size_t> outlier_channels(const SynthLayerSpec& spec);

// i.i.d. standard Gaussian columns, each rescaled to 2-norm <= m_x.
CalibrationBatch gen_calibration(std::size_t d_in, std::size_t n, double m_x, std::uint64_t seed,
                                 double val_fraction = 0.25);

struct ActivationModel {
  linalg::Matrix mixing;               // d_in × rank
  std::vector<double> channel_scale;   // σ
  double noise = 0.0;
};
ActivationModel make_activation_model(const SynthLayerSpec& spec);

// n samples as columns of a d_in × n matrix. `channel_gain`, if given,
// multiplies each channel's std by sqrt(gain_j) (covariance diagonal ×gain).
linalg::Matrix sample_activations(const ActivationModel& model, std::size_t n, double m_x,
                                  std::mt19937_64& rng,
                                  const std::vector<double>* channel_gain = nullptr);

// One synthetic problem: layer, calibration inputs and a held-out batch,
// all drawn from the spec's seed.
struct SynthInstance {
  linalg::Matrix w;
  linalg::Matrix x_calib;    // d_in × n_calib
  linalg::Matrix x_heldout;  // d_in × n_heldout
};
SynthInstance make_instance(const SynthLayerSpec& spec);

// Per-channel covariance gains 1 + u, u ~ U[−0.3, 0.3].
std::vector<double> covariance_shift(std::size_t d_in, std::uint64_t seed);

struct Evaluation {
  objective::LossBreakdown heldout;  // recon/sar/drift on the held-out batch
  double heldout_risk = 0.0;         // (1/m)·Σ‖ΔW·x_i‖²
};
Evaluation evaluate(const linalg::Matrix& w, const quant::QuantizedLayer& layer,
                    const linalg::Matrix& x_heldout,
                    const saliency::SaliencyProfile* profile = nullptr);

enum class Method { Gs, Gbs };
std::string to_string(Method m);
Method parse_method(const std::string& s);

struct SweepRecord {
  double lambda = 0.0;
  std::optional<double> gamma;
  double recon = 0.0;  // calibration reconstruction error
  double sar = 0.0;    // calibration saliency-aware regularizer
  double drift = 0.0;
  double heldout_risk = 0.0;
  std::string method;
  std::uint64_t seed = 0;
};

struct SweepOptions {
  double gamma = 0.5;            // GBS saliency exponent
  bool identity_saliency = false;
  std::size_t block_size = 128;
  std::size_t jobs = 1;
};

// Ten-point λ grid used for trade-off sweeps: 0 plus a log-spaced ladder.
std::vector<double> default_sweep_grid();

// One λ sweep on a fixed layer: quantize on x_cal at every λ and record
// calibration metrics plus held-out risk on x_heldout.
std::vector<SweepRecord> sweep_layer(const linalg::Matrix& w, const linalg::Matrix& x_cal,
                                     const linalg::Matrix& x_heldout,
                                     const quant::QuantScheme& scheme, Method method,
                                     const std::vector<double>& lambda_grid, std::uint64_t seed,
                                     const SweepOptions& options = {});

// For each seed × λ: generate (W, calibration, held-out) from the spec with
// that seed, quantize at λ and record metrics. Sorted by (seed, λ).
std::vector<SweepRecord> sweep_lambda(const SynthLayerSpec& spec, const quant::QuantScheme& scheme,
                                      Method method, const std::vector<double>& lambda_grid,
                                      const std::vector<std::uint64_t>& seeds,
                                      const SweepOptions& options = {});

// Validation table behind λ (GS) or (λ, γ) (GBS) selection: every grid
// point is fitted on the training split (GBS: on the lowest-index channel
// subset) and scored by reconstruction loss on the validation split.
struct SelectionRow {
  double lambda = 0.0;
  std::optional<double> gamma;
  double val_loss = 0.0;
};
std::vector<SelectionRow> selection_table(const linalg::Matrix& w, const CalibrationBatch& batch,
                                          const quant::QuantScheme& scheme, Method method,
                                          const std::vector<double>& lambda_grid,
                                          const std::vector<double>& gamma_grid,
                                          std::size_t block_size = 128);

std::string sweep_csv_header();
std::string to_csv_row(const SweepRecord& r);

struct CalibSizeRow {
  std::size_t size = 0;
  double median_baseline = 0.0;  // λ = 0 (undamped GPTQ)
  double median_selected = 0.0;  // (λ, γ) selected on a validation split
  double relative_gap() const;   // (baseline − selected) / baseline
};

struct CalibStudyOptions {
  std::size_t seeds = 20;
  // A calibration sample is a short sequence of this many input columns.
  std::size_t tokens_per_sample = 2;
  std::uint64_t first_seed = 0;
  bool shift = true;
  std::size_t jobs = 1;
};

// Held-out risk medians for the baseline and the λ-selected solver as the
// calibration set grows; calibration inputs carry the covariance shift.
std::vector<CalibSizeRow> calib_size_study(const SynthLayerSpec& spec,
                                           const quant::QuantScheme& scheme,
                                           const std::vector<std::size_t>& sizes,
                                           const CalibStudyOptions& options = {});

double median(std::vector<double> v);

}  // namespace sarqc::bench
