#include "sarqc/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <tuple>

#include "sarqc/error.hpp"
#include "sarqc/parallel.hpp"
#include "sarqc/rng.hpp"
#include "sarqc/solver_gbs.hpp"
#include "sarqc/solver_gs.hpp"

namespace sarqc::bench {

using linalg::Matrix;

void SynthLayerSpec::validate() const {
  if (d_out == 0 || d_in == 0) throw InvalidArgument("layer dimensions must be positive");
  if (outlier_channels > d_in || act_outlier_channels > d_in) {
    throw InvalidArgument("outlier channel count exceeds d_in");
  }
  if (!(outlier_scale >= 1.0) || !(act_outlier_scale >= 1.0)) {
    throw InvalidArgument("outlier scales must be >= 1");
  }
  if (!(weight_std > 0.0) || !(act_noise >= 0.0) || !(m_x > 0.0)) {
    throw InvalidArgument("scales must be positive");
  }
  if (act_rank == 0) throw InvalidArgument("activation rank must be >= 1");
  if (n_calib < 2 || n_heldout == 0) throw InvalidArgument("sample counts too small");
}

namespace {

std::vector<std::size_t> pick_channels(std::size_t d_in, std::size_t count, std::mt19937_64 rng) {
  std::vector<std::size_t> all(d_in);
  std::iota(all.begin(), all.end(), 0);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

void clip_columns(Matrix& x, double m_x) {
  if (!std::isfinite(m_x)) return;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double sq = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) sq += x(r, c) * x(r, c);
    const double norm = std::sqrt(sq);
    if (norm > m_x) {
      const double f = m_x / norm;
      for (std::size_t r = 0; r < x.rows(); ++r) x(r, c) *= f;
    }
  }
}

}  // namespace

std::vector<std::size_t> outlier_channels(const SynthLayerSpec& spec) {
  return pick_channels(spec.d_in, spec.outlier_channels,
                       make_rng(spec.seed, Stream::LayerOutliers));
}

Matrix gen_layer(const SynthLayerSpec& spec) {
  spec.validate();
  auto rng = make_rng(spec.seed, Stream::LayerWeights);
  std::normal_distribution<double> nd(0.0, spec.weight_std);
  Matrix w(spec.d_out, spec.d_in);
  for (double& v : w.data()) v = nd(rng);
  for (std::size_t c : outlier_channels(spec)) {
    for (std::size_t r = 0; r < spec.d_out; ++r) w(r, c) *= spec.outlier_scale;
  }
  return w;
}

CalibrationBatch gen_calibration(std::size_t d_in, std::size_t n, double m_x, std::uint64_t seed,
                                 double val_fraction) {
  if (d_in == 0) throw InvalidArgument("gen_calibration: d_in must be positive");
  if (n < 2) throw InvalidArgument("gen_calibration: need at least 2 samples");
  if (!(m_x > 0.0)) throw InvalidArgument("gen_calibration: M_X must be positive");
  auto rng = make_rng(seed, Stream::Calibration);
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix x(d_in, n);
  for (double& v : x.data()) v = nd(rng);
  clip_columns(x, m_x);
  return CalibrationBatch(std::move(x), val_fraction);
}

ActivationModel make_activation_model(const SynthLayerSpec& spec) {
  spec.validate();
  auto rng = make_rng(spec.seed, Stream::ActivationModel);
  std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(static_cast<double>(spec.act_rank)));
  ActivationModel m;
  m.mixing = Matrix(spec.d_in, spec.act_rank);
  for (double& v : m.mixing.data()) v = nd(rng);
  std::lognormal_distribution<double> ln(0.0, 0.5);
  m.channel_scale.resize(spec.d_in);
  for (double& s : m.channel_scale) s = ln(rng);
  for (std::size_t c : pick_channels(spec.d_in, spec.act_outlier_channels, rng)) {
    m.channel_scale[c] *= spec.act_outlier_scale;
  }
  m.noise = spec.act_noise;
  return m;
}

Matrix sample_activations(const ActivationModel& model, std::size_t n, double m_x,
                          std::mt19937_64& rng, const std::vector<double>* channel_gain) {
  const std::size_t d = model.mixing.rows();
  const std::size_t k = model.mixing.cols();
  if (channel_gain != nullptr && channel_gain->size() != d) {
    throw InvalidArgument("sample_activations: gain length must equal d_in");
  }
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix x(d, n);
  std::vector<double> z(k);
  for (std::size_t c = 0; c < n; ++c) {
    for (double& v : z) v = nd(rng);
    for (std::size_t r = 0; r < d; ++r) {
      double acc = 0.0;
      for (std::size_t f = 0; f < k; ++f) acc += model.mixing(r, f) * z[f];
      double s = model.channel_scale[r];
      if (channel_gain != nullptr) s *= std::sqrt((*channel_gain)[r]);
      x(r, c) = s * (acc + model.noise * nd(rng));
    }
  }
  clip_columns(x, m_x);
  return x;
}

SynthInstance make_instance(const SynthLayerSpec& spec) {
  spec.validate();
  const ActivationModel model = make_activation_model(spec);
  auto cal_rng = make_rng(spec.seed, Stream::Calibration);
  auto held_rng = make_rng(spec.seed, Stream::Heldout);
  SynthInstance inst;
  inst.w = gen_layer(spec);
  inst.x_calib = sample_activations(model, spec.n_calib, spec.m_x, cal_rng);
  inst.x_heldout = sample_activations(model, spec.n_heldout, spec.m_x, held_rng);
  return inst;
}

std::vector<double> covariance_shift(std::size_t d_in, std::uint64_t seed) {
  auto rng = make_rng(seed, Stream::CovarianceShift);
  std::uniform_real_distribution<double> ud(-0.3, 0.3);
  std::vector<double> gain(d_in);
  for (double& g : gain) g = 1.0 + ud(rng);
  return gain;
}

Evaluation evaluate(const Matrix& w, const quant::QuantizedLayer& layer, const Matrix& x_heldout,
                    const saliency::SaliencyProfile* profile) {
  if (x_heldout.cols() == 0) throw InvalidArgument("evaluate: empty held-out batch");
  const saliency::SaliencyProfile identity = saliency::SaliencyProfile::identity(w.cols());
  Evaluation ev;
  ev.heldout = objective::breakdown(w, layer.dequantized, x_heldout,
                                    profile != nullptr ? *profile : identity);
  ev.heldout_risk = ev.heldout.recon / static_cast<double>(x_heldout.cols());
  return ev;
}

std::string to_string(Method m) { return m == Method::Gs ? "sarqc-gs" : "sarqc-gbs"; }

Method parse_method(const std::string& s) {
  if (s == "gs" || s == "sarqc-gs") return Method::Gs;
  if (s == "gbs" || s == "sarqc-gbs") return Method::Gbs;
  throw InvalidArgument("unknown sweep method '" + s + "'");
}

std::vector<double> default_sweep_grid() {
  return {0.0, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0};
}

std::vector<SweepRecord> sweep_layer(const Matrix& w, const Matrix& x_cal, const Matrix& x_held,
                                     const quant::QuantScheme& scheme, Method method,
                                     const std::vector<double>& lambda_grid, std::uint64_t seed,
                                     const SweepOptions& options) {
  if (lambda_grid.empty()) throw InvalidArgument("sweep: lambda grid must be nonempty");
  std::vector<SweepRecord> out;
  if (method == Method::Gbs) {
    const saliency::SaliencyProfile profile =
        options.identity_saliency ? saliency::SaliencyProfile::identity(w.cols())
                                  : gbs::gbs_profile(w, x_cal, options.gamma);
    for (double lambda : lambda_grid) {
      const auto curv = gbs::build_curvature(x_cal, profile, lambda);
      const auto layer = gbs::run_gbs(w, curv, scheme, options.block_size);
      SweepRecord r;
      r.lambda = lambda;
      if (!options.identity_saliency) r.gamma = options.gamma;
      r.recon = objective::recon_loss(w, layer.dequantized, x_cal);
      // Identity profiles act as sqrt(h̄)·I inside the curvature.
      r.sar = profile.kind == saliency::ProfileKind::Identity
                  ? curv.h_bar * objective::weight_drift(w, layer.dequantized)
                  : objective::sar_loss(w, layer.dequantized, profile);
      r.drift = objective::weight_drift(w, layer.dequantized);
      r.heldout_risk = evaluate(w, layer, x_held).heldout_risk;
      r.method = to_string(method);
      r.seed = seed;
      out.push_back(r);
    }
  } else {
    gs::GsConfig cfg;
    cfg.scheme = scheme;
    cfg.saliency_kind = options.identity_saliency ? gs::SaliencyKind::Identity : gs::SaliencyKind::GS;
    const gs::CandidateSet set = gs::build_candidates(w, x_cal, cfg);
    std::vector<double> recon;
    std::vector<double> sar;
    for (const auto& l : set.losses) {
      recon.push_back(l.recon);
      sar.push_back(l.sar);
    }
    for (double lambda : lambda_grid) {
      const std::size_t idx = gs::select_candidate(recon, sar, lambda);
      const auto& layer = set.layers[idx];
      SweepRecord r;
      r.lambda = lambda;
      r.recon = set.losses[idx].recon;
      r.sar = set.losses[idx].sar;
      r.drift = set.losses[idx].drift;
      r.heldout_risk = evaluate(w, layer, x_held).heldout_risk;
      r.method = to_string(method);
      r.seed = seed;
      out.push_back(r);
    }
  }
  return out;
}

std::vector<SweepRecord> sweep_lambda(const SynthLayerSpec& spec, const quant::QuantScheme& scheme,
                                      Method method, const std::vector<double>& lambda_grid,
                                      const std::vector<std::uint64_t>& seeds,
                                      const SweepOptions& options) {
  if (lambda_grid.empty()) throw InvalidArgument("sweep_lambda: lambda grid must be nonempty");
  if (seeds.empty()) throw InvalidArgument("sweep_lambda: need at least one seed");
  spec.validate();
  std::vector<std::vector<SweepRecord>> per_seed(seeds.size());
  parallel_for(seeds.size(), options.jobs, [&](std::size_t si) {
    SynthLayerSpec s = spec;
    s.seed = seeds[si];
    const SynthInstance inst = make_instance(s);
    per_seed[si] = sweep_layer(inst.w, inst.x_calib, inst.x_heldout, scheme, method, lambda_grid,
                               s.seed, options);
  });
  std::vector<SweepRecord> all;
  for (auto& v : per_seed) all.insert(all.end(), v.begin(), v.end());
  std::stable_sort(all.begin(), all.end(), [](const SweepRecord& a, const SweepRecord& b) {
    return std::tie(a.seed, a.lambda) < std::tie(b.seed, b.lambda);
  });
  return all;
}

std::vector<SelectionRow> selection_table(const Matrix& w, const CalibrationBatch& batch,
                                          const quant::QuantScheme& scheme, Method method,
                                          const std::vector<double>& lambda_grid,
                                          const std::vector<double>& gamma_grid,
                                          std::size_t block_size) {
  if (lambda_grid.empty()) throw InvalidArgument("selection_table: lambda grid must be nonempty");
  if (batch.d_in() != w.cols()) throw InvalidArgument("selection_table: d_in mismatch");
  const Matrix x_train = batch.train();
  const Matrix x_val = batch.val();
  std::vector<SelectionRow> rows;
  if (method == Method::Gs) {
    gs::GsConfig cfg;
    cfg.scheme = scheme;
    const gs::CandidateSet set = gs::build_candidates(w, x_train, cfg);
    std::vector<double> recon;
    std::vector<double> sar;
    for (const auto& l : set.losses) {
      recon.push_back(l.recon);
      sar.push_back(l.sar);
    }
    for (double lambda : lambda_grid) {
      const std::size_t idx = gs::select_candidate(recon, sar, lambda);
      rows.push_back({lambda, std::nullopt,
                      objective::recon_loss(w, set.layers[idx].dequantized, x_val)});
    }
    return rows;
  }
  if (gamma_grid.empty()) throw InvalidArgument("selection_table: gamma grid must be nonempty");
  const std::size_t m = gbs::subset_size(w.cols(), gbs::GbsConfig{});
  const Matrix sub_w = w.block(0, 0, w.rows(), m);
  const Matrix sub_train = x_train.block(0, 0, m, x_train.cols());
  const Matrix sub_val = x_val.block(0, 0, m, x_val.cols());
  for (double gamma : gamma_grid) {
    const saliency::SaliencyProfile profile = gbs::gbs_profile(sub_w, sub_train, gamma);
    for (double lambda : lambda_grid) {
      const auto layer =
          gbs::run_gbs(sub_w, gbs::build_curvature(sub_train, profile, lambda), scheme, block_size);
      rows.push_back({lambda, gamma, objective::recon_loss(sub_w, layer.dequantized, sub_val)});
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SelectionRow& a, const SelectionRow& b) {
    return std::tie(a.lambda, *a.gamma) < std::tie(b.lambda, *b.gamma);
  });
  return rows;
}

std::string sweep_csv_header() { return "lambda,gamma,recon,sar,drift,heldout_risk,method,seed"; }

namespace {
std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

std::string to_csv_row(const SweepRecord& r) {
  return fmt(r.lambda) + "," + (r.gamma ? fmt(*r.gamma) : std::string()) + "," + fmt(r.recon) +
         "," + fmt(r.sar) + "," + fmt(r.drift) + "," + fmt(r.heldout_risk) + "," + r.method + "," +
         std::to_string(r.seed);
}

double CalibSizeRow::relative_gap() const {
  return median_baseline > 0.0 ? (median_baseline - median_selected) / median_baseline : 0.0;
}

double median(std::vector<double> v) {
  if (v.empty()) throw InvalidArgument("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<CalibSizeRow> calib_size_study(const SynthLayerSpec& spec,
                                           const quant::QuantScheme& scheme,
                                           const std::vector<std::size_t>& sizes,
                                           const CalibStudyOptions& options) {
  spec.validate();
  if (sizes.empty()) throw InvalidArgument("calib_size_study: sizes must be nonempty");
  if (!std::is_sorted(sizes.begin(), sizes.end())) {
    throw InvalidArgument("calib_size_study: sizes must be ascending");
  }
  if (options.seeds == 0) throw InvalidArgument("calib_size_study: need at least one seed");
  if (options.tokens_per_sample == 0) throw InvalidArgument("calib_size_study: tokens_per_sample must be >= 1");
  if (sizes.front() * options.tokens_per_sample < 2) {
    throw InvalidArgument("calib_size_study: need at least 2 calibration columns");
  }

  const std::size_t cells = sizes.size() * options.seeds;
  std::vector<double> baseline(cells);
  std::vector<double> selected(cells);
  parallel_for(cells, options.jobs, [&](std::size_t cell) {
    const std::size_t size = sizes[cell / options.seeds];
    SynthLayerSpec s = spec;
    s.seed = options.first_seed + cell % options.seeds;
    const Matrix w = gen_layer(s);
    const ActivationModel model = make_activation_model(s);
    const std::vector<double> gain = covariance_shift(s.d_in, s.seed);
    auto cal_rng = make_rng(s.seed, Stream::Calibration, size);
    auto held_rng = make_rng(s.seed, Stream::Heldout);
    const Matrix x_cal = sample_activations(model, size * options.tokens_per_sample, s.m_x, cal_rng,
                                            options.shift ? &gain : nullptr);
    const Matrix x_held = sample_activations(model, s.n_heldout, s.m_x, held_rng);

    const auto base_curv =
        gbs::build_curvature(x_cal, saliency::SaliencyProfile::identity(s.d_in), 0.0);
    const auto base_layer = gbs::run_gbs(w, base_curv, scheme, 128);
    baseline[cell] = evaluate(w, base_layer, x_held).heldout_risk;

    gbs::GbsConfig cfg;
    cfg.scheme = scheme;
    const auto sel = gbs::select_hparams_gbs(w, CalibrationBatch(x_cal, cfg.val_fraction), cfg);
    selected[cell] = evaluate(w, sel.layer, x_held).heldout_risk;
  });

  std::vector<CalibSizeRow> rows;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const auto b = baseline.begin() + static_cast<std::ptrdiff_t>(i * options.seeds);
    const auto e = selected.begin() + static_cast<std::ptrdiff_t>(i * options.seeds);
    CalibSizeRow row;
    row.size = sizes[i];
    row.median_baseline = median({b, b + static_cast<std::ptrdiff_t>(options.seeds)});
    row.median_selected = median({e, e + static_cast<std::ptrdiff_t>(options.seeds)});
    rows.push_back(row);
  }
  return rows;
}

}  // namespace sarqc::bench
