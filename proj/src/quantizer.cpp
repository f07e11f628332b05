#include "sarqc/quantizer.hpp"

#include <algorithm>
#include <cmath>

#include "sarqc/error.hpp"

namespace sarqc::quant {

void QuantScheme::validate() const {
  if (bits < 2 || bits > 16) {
    throw InvalidArgument("bits must be in [2, 16], got " + std::to_string(bits));
  }
  if (granularity == Granularity::Group && group_size == 0) {
    throw InvalidArgument("group_size must be >= 1");
  }
}

std::int32_t QuantScheme::code_min() const {
  return mode == Mode::Symmetric ? -((1 << (bits - 1)) - 1) : 0;
}

std::int32_t QuantScheme::code_max() const {
  return mode == Mode::Symmetric ? (1 << (bits - 1)) - 1 : (1 << bits) - 1;
}

std::size_t QuantScheme::group_width(std::size_t d_in) const {
  if (granularity == Granularity::Group) return std::min(group_size, std::max<std::size_t>(d_in, 1));
  return std::max<std::size_t>(d_in, 1);
}

std::size_t QuantScheme::num_groups(std::size_t d_in) const {
  if (d_in == 0) return 0;
  const std::size_t g = group_width(d_in);
  return (d_in + g - 1) / g;
}

std::string to_string(Mode m) { return m == Mode::Symmetric ? "sym" : "asym"; }

Mode parse_mode(const std::string& s) {
  if (s == "sym" || s == "symmetric") return Mode::Symmetric;
  if (s == "asym" || s == "asymmetric") return Mode::Asymmetric;
  throw InvalidArgument("unknown quantization mode '" + s + "'");
}

double round_half_even(double x) { return std::nearbyint(x); }

GroupParams fit_group(std::span<const double> w, const QuantScheme& scheme) {
  if (w.empty()) throw InvalidArgument("cannot quantize an empty group");
  GroupParams p;
  if (scheme.mode == Mode::Symmetric) {
    double amax = 0.0;
    for (double v : w) amax = std::max(amax, std::abs(v));
    if (amax == 0.0) return p;
    p.scale = amax / static_cast<double>(scheme.code_max());
    return p;
  }
  // The range always contains zero so the zero point is a valid code.
  double lo = 0.0;
  double hi = 0.0;
  for (double v : w) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi == lo) return p;
  const auto maxq = static_cast<double>(scheme.code_max());
  p.scale = (hi - lo) / maxq;
  p.zero_point = static_cast<std::int32_t>(std::clamp(round_half_even(-lo / p.scale), 0.0, maxq));
  return p;
}

std::int32_t quantize_value(double w, const GroupParams& p, const QuantScheme& scheme) {
  const double q = round_half_even(w / p.scale) + static_cast<double>(p.zero_point);
  const double clipped = std::clamp(q, static_cast<double>(scheme.code_min()),
                                    static_cast<double>(scheme.code_max()));
  return static_cast<std::int32_t>(clipped);
}

GroupCodes quantize_group(std::span<const double> w, const QuantScheme& scheme) {
  scheme.validate();
  const GroupParams p = fit_group(w, scheme);
  GroupCodes out;
  out.scale = p.scale;
  out.zero_point = p.zero_point;
  out.codes.reserve(w.size());
  for (double v : w) out.codes.push_back(quantize_value(v, p, scheme));
  return out;
}

std::vector<double> dequantize_group(std::span<const std::int32_t> codes, double scale,
                                     std::int32_t zero_point) {
  std::vector<double> out;
  out.reserve(codes.size());
  for (auto c : codes) out.push_back(dequantize_value(c, {scale, zero_point}));
  return out;
}

ParamGrid fit_params(const linalg::Matrix& w, const QuantScheme& scheme) {
  scheme.validate();
  const std::size_t d_out = w.rows();
  const std::size_t d_in = w.cols();
  if (d_in == 0) throw InvalidArgument("cannot quantize a matrix with no input channels");
  const std::size_t width = scheme.group_width(d_in);
  const std::size_t groups = scheme.num_groups(d_in);
  ParamGrid grid{linalg::Matrix(d_out, groups), IntMatrix(d_out, groups)};

  if (scheme.granularity == Granularity::PerTensor) {
    const GroupParams p = fit_group(w.data(), scheme);
    for (std::size_t r = 0; r < d_out; ++r) {
      grid.scales(r, 0) = p.scale;
      grid.zero_points(r, 0) = p.zero_point;
    }
    return grid;
  }
  for (std::size_t r = 0; r < d_out; ++r) {
    auto row = w.row(r);
    for (std::size_t g = 0; g < groups; ++g) {
      const std::size_t begin = g * width;
      const std::size_t len = std::min(width, d_in - begin);
      const GroupParams p = fit_group(row.subspan(begin, len), scheme);
      grid.scales(r, g) = p.scale;
      grid.zero_points(r, g) = p.zero_point;
    }
  }
  return grid;
}

QuantizedLayer quantize_matrix(const linalg::Matrix& w, const QuantScheme& scheme) {
  ParamGrid grid = fit_params(w, scheme);
  const std::size_t d_out = w.rows();
  const std::size_t d_in = w.cols();
  const std::size_t width = scheme.group_width(d_in);

  QuantizedLayer layer;
  layer.scheme = scheme;
  layer.codes = IntMatrix(d_out, d_in);
  layer.dequantized = linalg::Matrix(d_out, d_in);
  for (std::size_t r = 0; r < d_out; ++r) {
    for (std::size_t c = 0; c < d_in; ++c) {
      const GroupParams p{grid.scales(r, c / width), grid.zero_points(r, c / width)};
      const std::int32_t code = quantize_value(w(r, c), p, scheme);
      layer.codes(r, c) = code;
      layer.dequantized(r, c) = dequantize_value(code, p);
    }
  }
  layer.scales = std::move(grid.scales);
  layer.zero_points = std::move(grid.zero_points);
  return layer;
}

}  // namespace sarqc::quant
