#include "sarqc/solver_gs.hpp"

#include <cmath>

#include "sarqc/error.hpp"

namespace sarqc::gs {

std::vector<double> default_alpha_grid() {
  std::vector<double> g;
  for (int k = 0; k <= 20; ++k) g.push_back(k / 20.0);
  return g;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> g;
  for (int k = 1; k <= 10; ++k) g.push_back(k / 10.0);
  return g;
}

void GsConfig::validate() const {
  if (alpha_grid.size() < 2) throw InvalidArgument("alpha grid needs at least 2 points");
  for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
    if (!(alpha_grid[i] >= 0.0 && alpha_grid[i] <= 1.0)) {
      throw InvalidArgument("alpha grid values must lie in [0, 1]");
    }
    if (i > 0 && !(alpha_grid[i] > alpha_grid[i - 1])) {
      throw InvalidArgument("alpha grid must be strictly increasing");
    }
  }
  if (lambda_grid.empty()) throw InvalidArgument("lambda grid must be nonempty");
  for (double l : lambda_grid) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw InvalidArgument("lambda values must be >= 0");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be >= 0");
  scheme.validate();
}

quant::QuantizedLayer candidate(const linalg::Matrix& w, const saliency::ChannelStats& stats,
                                double alpha, const quant::QuantScheme& scheme) {
  if (stats.size() != w.cols()) throw InvalidArgument("candidate: stats length must equal d_in");
  std::vector<double> s = saliency::scaling_vector_gs(stats, alpha);
  linalg::Matrix scaled = w;
  for (std::size_t r = 0; r < w.rows(); ++r) {
    auto row = scaled.row(r);
    for (std::size_t c = 0; c < w.cols(); ++c) row[c] *= s[c];
  }
  quant::QuantizedLayer layer = quant::quantize_matrix(scaled, scheme);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    auto row = layer.dequantized.row(r);
    for (std::size_t c = 0; c < w.cols(); ++c) row[c] /= s[c];
  }
  layer.channel_scale = std::move(s);
  return layer;
}

std::size_t select_candidate(std::span<const double> recon, std::span<const double> sar,
                             double lambda, std::vector<double>* recon_n,
                             std::vector<double>* sar_n) {
  std::vector<double> rn = objective::minmax_normalize(recon);
  std::vector<double> sn = objective::minmax_normalize(sar);
  const std::size_t idx = objective::argmin_lowest(objective::joint_score(rn, sn, lambda));
  if (recon_n != nullptr) *recon_n = std::move(rn);
  if (sar_n != nullptr) *sar_n = std::move(sn);
  return idx;
}

namespace {

saliency::SaliencyProfile profile_for(const GsConfig& config, const saliency::ChannelStats& stats) {
  if (config.saliency_kind == SaliencyKind::GS) return saliency::saliency_vector_gs(stats);
  return saliency::SaliencyProfile::identity(stats.size());
}

GsResult assemble(CandidateSet& set, const GsConfig& config, double lambda) {
  std::vector<double> recon;
  std::vector<double> sar;
  for (const auto& l : set.losses) {
    recon.push_back(l.recon);
    sar.push_back(l.sar);
  }
  GsResult result;
  result.selected_index = select_candidate(recon, sar, lambda, &result.recon_n, &result.sar_n);
  result.chosen_alpha = config.alpha_grid[result.selected_index];
  result.chosen_lambda = lambda;
  result.losses = set.losses;
  for (std::size_t i = 0; i < result.losses.size(); ++i) {
    result.losses[i].joint_normalized = result.recon_n[i] + lambda * result.sar_n[i];
  }
  result.layer = set.layers[result.selected_index];
  return result;
}

}  // namespace

CandidateSet build_candidates(const linalg::Matrix& w, const linalg::Matrix& x_train,
                              const GsConfig& config) {
  config.validate();
  const saliency::ChannelStats stats = saliency::channel_stats(w, x_train);
  const saliency::SaliencyProfile profile = profile_for(config, stats);
  CandidateSet set;
  set.layers.reserve(config.alpha_grid.size());
  for (double alpha : config.alpha_grid) {
    quant::QuantizedLayer layer = candidate(w, stats, alpha, config.scheme);
    set.losses.push_back(objective::breakdown(w, layer.dequantized, x_train, profile));
    set.layers.push_back(std::move(layer));
  }
  return set;
}

GsResult run_gs(const linalg::Matrix& w, const linalg::Matrix& x_train, const GsConfig& config) {
  CandidateSet set = build_candidates(w, x_train, config);
  return assemble(set, config, config.lambda);
}

GsResult select_lambda_gs(const linalg::Matrix& w, const CalibrationBatch& batch,
                          const GsConfig& config) {
  config.validate();
  const linalg::Matrix x_train = batch.train();
  const linalg::Matrix x_val = batch.val();
  // Candidates and their raw losses do not depend on λ.
  CandidateSet set = build_candidates(w, x_train, config);

  GsResult best;
  double best_val = 0.0;
  bool have_best = false;
  std::vector<std::pair<double, double>> table;
  for (double lambda : config.lambda_grid) {
    GsResult r = assemble(set, config, lambda);
    const double val = objective::recon_loss(w, r.layer.dequantized, x_val);
    table.emplace_back(lambda, val);
    if (!have_best || val < best_val || (val == best_val && lambda < best.chosen_lambda)) {
      best = std::move(r);
      best_val = val;
      have_best = true;
    }
  }
  best.validation_table = std::move(table);
  return best;
}

}  // namespace sarqc::gs
