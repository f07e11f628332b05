#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sarqc/linalg.hpp"

namespace sarqc::quant {

enum class Mode { Symmetric, Asymmetric };
enum class Granularity { Group, PerChannel, PerTensor };
enum class Rounding { HalfToEven };

struct QuantScheme {
  int bits = 4;
  Mode mode = Mode::Asymmetric;
  Granularity granularity = Granularity::Group;
  std::size_t group_size = 128;  // used when granularity == Group
  Rounding rounding = Rounding::HalfToEven;

  // Throws InvalidArgument on bits < 2 or a zero group size.
  void validate() const;

  std::int32_t code_min() const;
  std::int32_t code_max() const;

  // Width of a group along the input dimension for a row of length d_in.
  std::size_t group_width(std::size_t d_in) const;
  std::size_t num_groups(std::size_t d_in) const;

  bool operator==(const QuantScheme&) const = default;
};

std::string to_string(Mode m);
Mode parse_mode(const std::string& s);

// Scale and zero point shared by one (row, group) slice.
struct GroupParams {
  double scale = 1.0;
  std::int32_t zero_point = 0;
};

struct GroupCodes {
  std::vector<std::int32_t> codes;
  double scale = 1.0;
  std::int32_t zero_point = 0;
};

// Round half to even.
double round_half_even(double x);

// Fits scale/zero point to a group without quantizing it.
GroupParams fit_group(std::span<const double> w, const QuantScheme& scheme);

std::int32_t quantize_value(double w, const GroupParams& p, const QuantScheme& scheme);
inline double dequantize_value(std::int32_t code, const GroupParams& p) {
  return p.scale * static_cast<double>(code - p.zero_point);
}

GroupCodes quantize_group(std::span<const double> w, const QuantScheme& scheme);
std::vector<double> dequantize_group(std::span<const std::int32_t> codes, double scale,
                                     std::int32_t zero_point);

// Integer matrix in row-major order.
struct IntMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int32_t> data;

  IntMatrix() = default;
  IntMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0) {}
  std::int32_t& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  std::int32_t operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  bool operator==(const IntMatrix&) const = default;
};

struct QuantizedLayer {
  IntMatrix codes;             // d_out × d_in
  linalg::Matrix scales;       // d_out × num_groups
  IntMatrix zero_points;       // d_out × num_groups
  linalg::Matrix dequantized;  // Ŵ, d_out × d_in
  // Per-input-channel reparameterization applied before quantization
  // (empty when none). dequantized = scale·(code − zero) / channel_scale.
  std::vector<double> channel_scale;
  QuantScheme scheme;

  GroupParams params(std::size_t row, std::size_t group) const {
    return {scales(row, group), zero_points(row, group)};
  }
};

// Scale/zero point for every (row, group) of W; per-tensor schemes
// replicate a single fit across all entries.
struct ParamGrid {
  linalg::Matrix scales;
  IntMatrix zero_points;
};
ParamGrid fit_params(const linalg::Matrix& w, const QuantScheme& scheme);

QuantizedLayer quantize_matrix(const linalg::Matrix& w, const QuantScheme& scheme);

// Round-to-nearest baseline.
inline QuantizedLayer rtn(const linalg::Matrix& w, const QuantScheme& scheme) {
  return quantize_matrix(w, scheme);
}

}  // namespace sarqc::quant
