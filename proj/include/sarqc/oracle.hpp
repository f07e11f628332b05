#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sarqc/linalg.hpp"
#include "sarqc/quantizer.hpp"

// Brute-force and enumerative checks for the closed-form and theoretical
// claims the solvers rely on. Nothing here calls into the solvers except
// where a suite compares a solver against its oracle.
namespace sarqc::oracle {

// ---- constrained row minimization ---------------------------------------

struct RowOracle {
  std::vector<double> delta;
  double objective = 0.0;  // ½·ΔᵀGΔ
};

// Fixes Δw_j = −(w_j − q̂_j) and minimizes ½ΔᵀGΔ over the other coordinates
// by solving G[−j,−j]·Δ[−j] = e_j·G[−j,j].
RowOracle oracle_row_update(std::span<const double> w_row, const linalg::Matrix& g,
                            std::size_t j, double qhat_j);

// ---- exhaustive discrete search -----------------------------------------

inline constexpr std::size_t kMaxExhaustive = 1'000'000;

struct ExhaustiveResult {
  std::vector<double> best_delta;
  double best_objective = 0.0;
};

// Global minimum of ½ΔᵀGΔ, Δ = q − w, over the product of per-coordinate
// candidate sets. Ties keep the first point in lexicographic order.
ExhaustiveResult exhaustive_quant_min(std::span<const double> w_row, const linalg::Matrix& g,
                                      const std::vector<std::vector<double>>& grids);

// Every point of the product grid with its two objective terms
// recon = ΔᵀHΔ and sar = Σ(s_j·Δ_j)².
struct EnumeratedPoint {
  std::vector<double> delta;
  double recon = 0.0;
  double sar = 0.0;
};
std::vector<EnumeratedPoint> enumerate_points(std::span<const double> w_row,
                                              const linalg::Matrix& h,
                                              std::span<const double> saliency,
                                              const std::vector<std::vector<double>>& grids);

// Index of the point minimizing recon + λ·sar (lowest index on ties).
std::size_t scalarized_argmin(const std::vector<EnumeratedPoint>& points, double lambda);

// Dequantized value of every code for the given group parameters.
std::vector<double> code_values(const quant::GroupParams& p, const quant::QuantScheme& scheme);

// ---- supportedness ------------------------------------------------------

struct FiniteCandidate {
  std::string id;
  double risk = 0.0;  // empirical calibration risk
  double dist = 0.0;  // squared drift
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct LambdaInterval {
  double lambda_min = 0.0;
  double lambda_max = kInfinity;
  bool supported = true;
};

// Requires `chosen` to minimize risk among candidates with dist <= R².
LambdaInterval lambda_interval(const std::vector<FiniteCandidate>& candidates,
                               const std::string& chosen, double r_sq);

struct ProbeResult {
  double lambda = 0.0;
  bool in_argmin = false;
  bool in_interval = false;
};

struct SupportednessReport {
  LambdaInterval interval;
  std::vector<ProbeResult> probes;
  bool passed = true;
  nlohmann::json counterexample;  // null when passed
};

// For every probe λ checks chosen ∈ argmin(risk + λ·dist) ⇔ λ ∈ [λ_min, λ_max].
// `tie_tol` is relative; 0 gives exact comparisons for integer fixtures.
SupportednessReport verify_supportedness(const std::vector<FiniteCandidate>& candidates,
                                         const std::string& chosen, double r_sq,
                                         std::span<const double> probes,
                                         double tie_tol = 1e-12);

// ---- generalization bound -----------------------------------------------

// R²·M_X²·sqrt(log(2·|class|/δ) / (2n)).
double hoeffding_bound(double r, double m_x, std::size_t class_size, std::size_t n, double delta);

struct HoeffdingParams {
  std::size_t d_in = 4;
  double r = 1.0;
  double m_x = 1.0;
  std::size_t n = 200;
  double delta = 0.05;
  std::size_t class_size = 16;
  std::size_t trials = 2000;
  std::size_t heldout_factor = 50;
  std::uint64_t seed = 0;
};

struct CoverageReport {
  double bound = 0.0;
  std::size_t trials = 0;
  std::size_t violations = 0;
  double violation_rate = 0.0;
  double threshold = 0.0;  // δ + 3·sqrt(δ(1−δ)/trials)
  double max_deviation = 0.0;
  bool passed = false;
};

CoverageReport hoeffding_check(const HoeffdingParams& params, std::size_t jobs = 1);

// ---- GPTQ reference -----------------------------------------------------

// Column-oriented sequential quantization over the whole matrix, written
// directly from the blocked pseudo-code with G supplied by the caller.
quant::QuantizedLayer gptq_reference(const linalg::Matrix& w, const linalg::Matrix& g,
                                     const quant::QuantScheme& scheme, std::size_t block_size);

// ---- suites -------------------------------------------------------------

struct SuiteReport {
  std::string name;
  bool passed = false;
  std::size_t trials = 0;
  nlohmann::json detail;
  nlohmann::json counterexample;  // null when passed
};

struct SuiteOptions {
  std::size_t trials = 0;  // 0 selects the suite default
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  bool flip_compensation_sign = false;  // fault injection for tests
};

SuiteReport run_compensation_suite(const SuiteOptions& opts);    // default 500
SuiteReport run_supportedness_suite(const SuiteOptions& opts);   // default 1000
SuiteReport run_hoeffding_suite(const SuiteOptions& opts);       // default 2000
SuiteReport run_gptq_equiv_suite(const SuiteOptions& opts);      // default 100
SuiteReport run_scalarization_suite(const SuiteOptions& opts);   // default 200

}  // namespace sarqc::oracle
