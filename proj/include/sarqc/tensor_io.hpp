#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sarqc/linalg.hpp"
#include "sarqc/quantizer.hpp"

// Minimal binary tensor container:
//   "SQTENSR1" | dtype u8 | rank u8 | rank × u64 dims | row-major payload
// All integers and floats are little-endian.
namespace sarqc::io {

enum class DType : std::uint8_t { F64 = 1, I32 = 2 };

std::size_t dtype_size(DType t);

struct Tensor {
  DType dtype = DType::F64;
  std::vector<std::uint64_t> dims;
  std::vector<double> f64;
  std::vector<std::int32_t> i32;

  std::uint64_t element_count() const;
  bool operator==(const Tensor&) const = default;
};

Tensor from_matrix(const linalg::Matrix& m);
Tensor from_ints(const quant::IntMatrix& m);

std::vector<std::uint8_t> encode(const Tensor& t);
Tensor decode(const std::vector<std::uint8_t>& bytes, const std::string& label = "<memory>");

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

// Reads only the header; dims of a valid file.
struct TensorHeader {
  DType dtype = DType::F64;
  std::vector<std::uint64_t> dims;
};
TensorHeader read_header(const std::filesystem::path& path);

// Rank-2 f64 tensor as a matrix. Non-finite values are rejected.
linalg::Matrix read_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const linalg::Matrix& m);
void write_ints(const std::filesystem::path& path, const quant::IntMatrix& m);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace sarqc::io
