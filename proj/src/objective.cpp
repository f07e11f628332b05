#include "sarqc/objective.hpp"

#include <algorithm>
#include <cmath>

#include "sarqc/error.hpp"

namespace sarqc::objective {

namespace {

void require_same_shape(const linalg::Matrix& a, const linalg::Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument(std::string(op) + ": W and W_hat shapes differ");
  }
}

}  // namespace

double recon_loss(const linalg::Matrix& w, const linalg::Matrix& w_hat, const linalg::Matrix& x) {
  require_same_shape(w, w_hat, "recon_loss");
  if (w.cols() != x.rows()) throw InvalidArgument("recon_loss: X rows must equal d_in");
  return linalg::frobenius_sq(linalg::matmul(w - w_hat, x));
}

double sar_loss(const linalg::Matrix& w, const linalg::Matrix& w_hat,
                const saliency::SaliencyProfile& s) {
  require_same_shape(w, w_hat, "sar_loss");
  if (s.size() != w.cols()) throw InvalidArgument("sar_loss: profile length must equal d_in");
  double acc = 0.0;
  for (std::size_t r = 0; r < w.rows(); ++r) {
    double row_acc = 0.0;
    for (std::size_t c = 0; c < w.cols(); ++c) {
      const double d = (w_hat(r, c) - w(r, c)) * s.values[c];
      row_acc += d * d;
    }
    acc += row_acc;
  }
  return acc;
}

double weight_drift(const linalg::Matrix& w, const linalg::Matrix& w_hat) {
  require_same_shape(w, w_hat, "weight_drift");
  double acc = 0.0;
  for (std::size_t r = 0; r < w.rows(); ++r) {
    double row_acc = 0.0;
    for (std::size_t c = 0; c < w.cols(); ++c) {
      const double d = w_hat(r, c) - w(r, c);
      row_acc += d * d;
    }
    acc += row_acc;
  }
  return acc;
}

LossBreakdown breakdown(const linalg::Matrix& w, const linalg::Matrix& w_hat,
                        const linalg::Matrix& x, const saliency::SaliencyProfile& s) {
  return {recon_loss(w, w_hat, x), sar_loss(w, w_hat, s), weight_drift(w, w_hat), std::nullopt};
}

std::vector<double> minmax_normalize(std::span<const double> values) {
  if (values.size() < 2) throw InvalidArgument("minmax_normalize: need at least 2 values");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  std::vector<double> out(values.size(), 0.0);
  if (hi == lo) return out;
  const double range = hi - lo;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - lo) / range;
  return out;
}

std::vector<double> joint_score(std::span<const double> recon_n, std::span<const double> sar_n,
                                double lambda) {
  if (recon_n.size() != sar_n.size()) throw InvalidArgument("joint_score: length mismatch");
  if (!(lambda >= 0.0)) throw InvalidArgument("joint_score: lambda must be >= 0");
  std::vector<double> out(recon_n.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = recon_n[i] + lambda * sar_n[i];
  return out;
}

std::size_t argmin_lowest(std::span<const double> scores) {
  if (scores.empty()) throw InvalidArgument("argmin over an empty score list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] < scores[best]) best = i;
  }
  return best;
}

}  // namespace sarqc::objective
