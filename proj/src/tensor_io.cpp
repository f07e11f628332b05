#include "sarqc/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "sarqc/error.hpp"

namespace sarqc::io {

namespace {

constexpr char kMagic[8] = {'S', 'Q', 'T', 'E', 'N', 'S', 'R', '1'};
constexpr std::size_t kMaxRank = 8;

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

}  // namespace

std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::F64: return 8;
    case DType::I32: return 4;
  }
  throw InvalidArgument("unknown tensor dtype");
}

std::uint64_t Tensor::element_count() const {
  std::uint64_t n = 1;
  for (std::uint64_t d : dims) n *= d;
  return n;
}

Tensor from_matrix(const linalg::Matrix& m) {
  Tensor t;
  t.dtype = DType::F64;
  t.dims = {m.rows(), m.cols()};
  t.f64 = m.data();
  return t;
}

Tensor from_ints(const quant::IntMatrix& m) {
  Tensor t;
  t.dtype = DType::I32;
  t.dims = {m.rows, m.cols};
  t.i32 = m.data;
  return t;
}

std::vector<std::uint8_t> encode(const Tensor& t) {
  if (t.dims.size() > kMaxRank) throw InvalidArgument("tensor rank too large");
  const std::uint64_t count = t.element_count();
  const std::size_t have = t.dtype == DType::F64 ? t.f64.size() : t.i32.size();
  if (have != count) throw InvalidArgument("tensor payload does not match its dims");
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.push_back(static_cast<std::uint8_t>(t.dtype));
  out.push_back(static_cast<std::uint8_t>(t.dims.size()));
  for (std::uint64_t d : t.dims) put_le<std::uint64_t>(out, d);
  out.reserve(out.size() + count * dtype_size(t.dtype));
  if (t.dtype == DType::F64) {
    for (double v : t.f64) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  } else {
    for (std::int32_t v : t.i32) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  }
  return out;
}

namespace {

std::size_t parse_header(const std::vector<std::uint8_t>& b, const std::string& label,
                         TensorHeader& h) {
  if (b.size() < 10 || std::memcmp(b.data(), kMagic, 8) != 0) {
    throw IoError(label + ": not a tensor file (bad magic)");
  }
  const std::uint8_t dt = b[8];
  if (dt != 1 && dt != 2) throw IoError(label + ": unknown dtype " + std::to_string(dt));
  h.dtype = static_cast<DType>(dt);
  const std::size_t rank = b[9];
  if (rank > kMaxRank) throw IoError(label + ": rank too large");
  if (b.size() < 10 + 8 * rank) throw IoError(label + ": truncated header");
  h.dims.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) h.dims[i] = get_le<std::uint64_t>(b.data() + 10 + 8 * i);
  return 10 + 8 * rank;
}

}  // namespace

Tensor decode(const std::vector<std::uint8_t>& bytes, const std::string& label) {
  TensorHeader h;
  const std::size_t offset = parse_header(bytes, label, h);
  Tensor t;
  t.dtype = h.dtype;
  t.dims = h.dims;
  const std::size_t elem = dtype_size(t.dtype);
  std::uint64_t count = 1;
  for (std::uint64_t d : t.dims) {
    if (d != 0 && count > std::numeric_limits<std::uint64_t>::max() / elem / d) {
      throw IoError(label + ": dims overflow");
    }
    count *= d;
  }
  if (bytes.size() - offset != count * elem) {
    throw IoError(label + ": payload is " + std::to_string(bytes.size() - offset) +
                  " bytes, expected " + std::to_string(count * elem));
  }
  const std::uint8_t* p = bytes.data() + offset;
  if (t.dtype == DType::F64) {
    t.f64.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      t.f64[i] = std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * i));
    }
  } else {
    t.i32.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      t.i32[i] = static_cast<std::int32_t>(get_le<std::uint32_t>(p + 4 * i));
    }
  }
  return t;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  write_bytes(path, encode(t));
}

Tensor read_tensor(const std::filesystem::path& path) {
  return decode(read_bytes(path), path.string());
}

TensorHeader read_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> head(10 + 8 * kMaxRank);
  in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  TensorHeader h;
  const std::size_t offset = parse_header(head, path.string(), h);
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat " + path.string());
  std::uint64_t count = 1;
  for (std::uint64_t d : h.dims) count *= d;
  if (size - offset != count * dtype_size(h.dtype)) {
    throw IoError(path.string() + ": payload length does not match header");
  }
  return h;
}

linalg::Matrix read_matrix(const std::filesystem::path& path) {
  Tensor t = read_tensor(path);
  if (t.dtype != DType::F64 || t.dims.size() != 2) {
    throw IoError(path.string() + ": expected a rank-2 f64 tensor");
  }
  for (double v : t.f64) {
    if (!std::isfinite(v)) throw IoError(path.string() + ": non-finite value");
  }
  return linalg::Matrix(t.dims[0], t.dims[1], std::move(t.f64));
}

void write_matrix(const std::filesystem::path& path, const linalg::Matrix& m) {
  write_tensor(path, from_matrix(m));
}

void write_ints(const std::filesystem::path& path, const quant::IntMatrix& m) {
  write_tensor(path, from_ints(m));
}

}  // namespace sarqc::io
