#include "sarqc/saliency.hpp"

#include <algorithm>
#include <cmath>

#include "sarqc/error.hpp"

namespace sarqc::saliency {

namespace {

double floored(double v) { return std::max(v, kStatFloor); }

void require_range(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw InvalidArgument(std::string(name) + " must lie in [0, 1]");
  }
}

}  // namespace

SaliencyProfile SaliencyProfile::identity(std::size_t d_in) {
  SaliencyProfile p;
  p.values.assign(d_in, 1.0);
  p.kind = ProfileKind::Identity;
  return p;
}

ChannelStats channel_stats(const linalg::Matrix& w, const linalg::Matrix& x) {
  if (w.cols() != x.rows()) {
    throw InvalidArgument("channel_stats: W has " + std::to_string(w.cols()) +
                          " input channels but X has " + std::to_string(x.rows()) + " rows");
  }
  if (w.rows() == 0 || x.cols() == 0) throw InvalidArgument("channel_stats: empty input");
  const std::size_t d_in = w.cols();
  ChannelStats s;
  s.mean_abs_x.resize(d_in);
  s.max_abs_x.resize(d_in);
  s.mean_abs_w.assign(d_in, 0.0);
  s.max_abs_w.assign(d_in, 0.0);

  for (std::size_t j = 0; j < d_in; ++j) {
    double sum = 0.0;
    double mx = 0.0;
    for (double v : x.row(j)) {
      sum += std::abs(v);
      mx = std::max(mx, std::abs(v));
    }
    s.mean_abs_x[j] = sum / static_cast<double>(x.cols());
    s.max_abs_x[j] = mx;
  }
  for (std::size_t r = 0; r < w.rows(); ++r) {
    auto row = w.row(r);
    for (std::size_t j = 0; j < d_in; ++j) {
      s.mean_abs_w[j] += std::abs(row[j]);
      s.max_abs_w[j] = std::max(s.max_abs_w[j], std::abs(row[j]));
    }
  }
  for (std::size_t j = 0; j < d_in; ++j) {
    s.mean_abs_w[j] /= static_cast<double>(w.rows());
    s.mean_abs_x[j] = floored(s.mean_abs_x[j]);
    s.mean_abs_w[j] = floored(s.mean_abs_w[j]);
    s.max_abs_x[j] = floored(s.max_abs_x[j]);
    s.max_abs_w[j] = floored(s.max_abs_w[j]);
  }
  return s;
}

std::vector<double> scaling_vector_gs(const ChannelStats& stats, double alpha) {
  require_range(alpha, "alpha");
  const std::size_t d = stats.size();
  if (d == 0) throw InvalidArgument("scaling_vector_gs: empty statistics");
  std::vector<double> s(d);
  for (std::size_t j = 0; j < d; ++j) {
    s[j] = std::pow(stats.mean_abs_x[j], alpha) / std::pow(stats.mean_abs_w[j], 1.0 - alpha);
  }
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
  const double norm = std::sqrt(*hi * *lo);
  for (double& v : s) v /= norm;
  return s;
}

SaliencyProfile saliency_vector_gs(const ChannelStats& stats) {
  SaliencyProfile p;
  p.kind = ProfileKind::GS;
  p.values.resize(stats.size());
  for (std::size_t j = 0; j < stats.size(); ++j) {
    p.values[j] = stats.mean_abs_x[j] / stats.mean_abs_w[j];
  }
  return p;
}

std::vector<double> saliency_vector_gbs(const ChannelStats& stats, double gamma) {
  require_range(gamma, "gamma");
  std::vector<double> s(stats.size());
  for (std::size_t j = 0; j < stats.size(); ++j) {
    s[j] = std::pow(stats.mean_abs_x[j], gamma) / std::pow(stats.mean_abs_w[j], 1.0 - gamma);
  }
  return s;
}

SaliencyProfile scale_normalize_gbs(const std::vector<double>& s, double h_bar,
                                    std::optional<double> gamma) {
  if (!(h_bar > 0.0) || !std::isfinite(h_bar)) {
    throw InvalidArgument("scale_normalize_gbs: h_bar must be positive");
  }
  if (s.empty()) throw InvalidArgument("scale_normalize_gbs: empty saliency vector");
  double mean_sq = 0.0;
  for (double v : s) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidArgument("scale_normalize_gbs: saliency must be positive and finite");
    }
    mean_sq += v * v;
  }
  mean_sq /= static_cast<double>(s.size());
  const double factor = std::sqrt(h_bar) / std::sqrt(mean_sq);
  SaliencyProfile p;
  p.kind = ProfileKind::GBS;
  p.gamma = gamma;
  p.h_bar = h_bar;
  p.values.reserve(s.size());
  for (double v : s) p.values.push_back(factor * v);
  return p;
}

}  // namespace sarqc::saliency
