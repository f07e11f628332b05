#include "sarqc/solver_gbs.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "sarqc/error.hpp"
#include "sarqc/objective.hpp"

namespace sarqc::gbs {

std::vector<double> default_lambda_grid() { return {0.25, 0.5, 0.75}; }
std::vector<double> default_gamma_grid() { return {0.1, 0.15, 0.35, 0.5}; }

void GbsConfig::validate() const {
  if (lambda_grid.empty() || gamma_grid.empty()) {
    throw InvalidArgument("lambda and gamma grids must be nonempty");
  }
  for (double l : lambda_grid) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw InvalidArgument("lambda values must be >= 0");
  }
  for (double g : gamma_grid) {
    if (!(g >= 0.0 && g <= 1.0)) throw InvalidArgument("gamma values must lie in [0, 1]");
  }
  if (block_size == 0) throw InvalidArgument("block size must be >= 1");
  if (!(subset_fraction > 0.0 && subset_fraction <= 1.0)) {
    throw InvalidArgument("subset_fraction must lie in (0, 1]");
  }
  scheme.validate();
}

CurvatureFactor build_curvature(const linalg::Matrix& x, const saliency::SaliencyProfile& s,
                                double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be >= 0");
  if (s.size() != x.rows()) throw InvalidArgument("build_curvature: profile length must equal d_in");
  CurvatureFactor f;
  f.lambda = lambda;
  f.g = linalg::gram(x);
  f.h_bar = linalg::mean_diagonal(f.g);
  if (lambda > 0.0) {
    for (std::size_t j = 0; j < f.g.rows(); ++j) {
      const double s2 = s.kind == saliency::ProfileKind::Identity ? f.h_bar
                                                                  : s.values[j] * s.values[j];
      f.g(j, j) += lambda * s2;
    }
  }
  f.m = linalg::chol_upper_of_inverse(f.g, linalg::default_jitter(f.g), "curvature");
  f.jitter_used = f.m.jitter_used;
  return f;
}

saliency::SaliencyProfile gbs_profile(const linalg::Matrix& w, const linalg::Matrix& x,
                                      double gamma) {
  const saliency::ChannelStats stats = saliency::channel_stats(w, x);
  const double h_bar = linalg::mean_diagonal(linalg::gram(x));
  return saliency::scale_normalize_gbs(saliency::saliency_vector_gbs(stats, gamma), h_bar, gamma);
}

namespace {

void gbs_row(std::size_t r, const linalg::Matrix& w, const linalg::TriangularFactor& m,
             const quant::ParamGrid& grid, const quant::QuantScheme& scheme, std::size_t block,
             quant::QuantizedLayer& out) {
  const std::size_t d = w.cols();
  const std::size_t width = scheme.group_width(d);
  std::vector<double> u(w.row(r).begin(), w.row(r).end());
  std::vector<double> err(block);
  for (std::size_t i = 0; i < d; i += block) {
    const std::size_t end = std::min(i + block, d);
    for (std::size_t j = i; j < end; ++j) {
      const quant::GroupParams p{grid.scales(r, j / width), grid.zero_points(r, j / width)};
      const std::int32_t code = quant::quantize_value(u[j], p, scheme);
      const double q = quant::dequantize_value(code, p);
      out.codes(r, j) = code;
      out.dequantized(r, j) = q;
      const double e = (u[j] - q) / m(j, j);
      err[j - i] = e;
      for (std::size_t k = j; k < end; ++k) u[k] -= e * m(j, k);
    }
    for (std::size_t c = end; c < d; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < end - i; ++k) acc += err[k] * m(i + k, c);
      u[c] -= acc;
    }
  }
}

}  // namespace

quant::QuantizedLayer run_gbs(const linalg::Matrix& w, const CurvatureFactor& curv,
                              const quant::QuantScheme& scheme, std::size_t block_size,
                              std::size_t jobs) {
  if (curv.m.dim != w.cols()) {
    throw InvalidArgument("run_gbs: curvature dimension " + std::to_string(curv.m.dim) +
                          " does not match d_in " + std::to_string(w.cols()));
  }
  if (block_size == 0) throw InvalidArgument("run_gbs: block size must be >= 1");
  quant::ParamGrid grid = quant::fit_params(w, scheme);

  quant::QuantizedLayer out;
  out.scheme = scheme;
  out.codes = quant::IntMatrix(w.rows(), w.cols());
  out.dequantized = linalg::Matrix(w.rows(), w.cols());

  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(w.rows(), 1));
  if (workers == 1) {
    for (std::size_t r = 0; r < w.rows(); ++r) {
      gbs_row(r, w, curv.m, grid, scheme, block_size, out);
    }
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
      threads.emplace_back([&, t] {
        for (std::size_t r = t; r < w.rows(); r += workers) {
          gbs_row(r, w, curv.m, grid, scheme, block_size, out);
        }
      });
    }
  }
  out.scales = std::move(grid.scales);
  out.zero_points = std::move(grid.zero_points);
  return out;
}

std::vector<CompensationStep> trace_row(std::span<const double> w_row,
                                        const linalg::TriangularFactor& m,
                                        std::span<const quant::GroupParams> params,
                                        const quant::QuantScheme& scheme) {
  const std::size_t d = w_row.size();
  if (m.dim != d) throw InvalidArgument("trace_row: factor dimension mismatch");
  const std::size_t width = scheme.group_width(d);
  if (params.size() != scheme.num_groups(d)) throw InvalidArgument("trace_row: wrong group count");
  std::vector<double> u(w_row.begin(), w_row.end());
  std::vector<CompensationStep> steps;
  steps.reserve(d);
  for (std::size_t j = 0; j < d; ++j) {
    const quant::GroupParams& p = params[j / width];
    const double q = quant::dequantize_value(quant::quantize_value(u[j], p, scheme), p);
    CompensationStep step;
    step.column = j;
    step.residual = u[j] - q;
    const double e = step.residual / m(j, j);
    for (std::size_t k = j; k < d; ++k) {
      const double delta = -e * m(j, k);
      step.update.push_back(delta);
      u[k] += delta;
    }
    steps.push_back(std::move(step));
  }
  return steps;
}

RowUpdate closed_form_update(const linalg::Matrix& g_inverse, std::size_t j, double e) {
  if (j >= g_inverse.rows()) throw InvalidArgument("closed_form_update: index out of range");
  const double mjj = g_inverse(j, j);
  RowUpdate out;
  out.delta.resize(g_inverse.rows());
  for (std::size_t k = 0; k < g_inverse.rows(); ++k) out.delta[k] = -(e / mjj) * g_inverse(k, j);
  out.objective = e * e / (2.0 * mjj);
  return out;
}

std::size_t subset_size(std::size_t d_in, const GbsConfig& config) {
  const auto frac = static_cast<std::size_t>(
      std::ceil(config.subset_fraction * static_cast<double>(d_in)));
  return std::min(d_in, std::max(config.min_subset, frac));
}

GbsSelection select_hparams_gbs(const linalg::Matrix& w, const CalibrationBatch& batch,
                                const GbsConfig& config, std::size_t jobs) {
  config.validate();
  if (batch.d_in() != w.cols()) throw InvalidArgument("calibration d_in does not match weights");
  const linalg::Matrix x_train = batch.train();
  const linalg::Matrix x_val = batch.val();
  const std::size_t m = subset_size(w.cols(), config);
  const linalg::Matrix sub_w = w.block(0, 0, w.rows(), m);
  const linalg::Matrix sub_train = x_train.block(0, 0, m, x_train.cols());
  const linalg::Matrix sub_val = x_val.block(0, 0, m, x_val.cols());

  auto profile = [&](const linalg::Matrix& ww, const linalg::Matrix& xx, double gamma) {
    if (config.saliency_kind == SaliencyKind::Identity) {
      return saliency::SaliencyProfile::identity(ww.cols());
    }
    return gbs_profile(ww, xx, gamma);
  };

  GbsSelection sel;
  const HparamEntry* best = nullptr;
  sel.table.reserve(config.lambda_grid.size() * config.gamma_grid.size());
  for (double lambda : config.lambda_grid) {
    for (double gamma : config.gamma_grid) {
      const CurvatureFactor curv = build_curvature(sub_train, profile(sub_w, sub_train, gamma), lambda);
      const quant::QuantizedLayer layer = run_gbs(sub_w, curv, config.scheme, config.block_size, jobs);
      sel.table.push_back({lambda, gamma, objective::recon_loss(sub_w, layer.dequantized, sub_val)});
    }
  }
  for (const HparamEntry& e : sel.table) {
    if (best == nullptr || e.val_loss < best->val_loss ||
        (e.val_loss == best->val_loss &&
         (e.lambda < best->lambda || (e.lambda == best->lambda && e.gamma < best->gamma)))) {
      best = &e;
    }
  }
  sel.lambda = best->lambda;
  sel.gamma = best->gamma;
  sel.curvature = build_curvature(x_train, profile(w, x_train, sel.gamma), sel.lambda);
  sel.layer = run_gbs(w, sel.curvature, config.scheme, config.block_size, jobs);
  return sel;
}

}  // namespace sarqc::gbs
