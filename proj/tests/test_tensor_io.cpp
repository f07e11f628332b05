#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

#include "doctest.h"
#include "helpers.hpp"
#include "sarqc/error.hpp"
#include "sarqc/tensor_io.hpp"

using namespace sarqc;
using linalg::Matrix;

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("header layout") {
  const auto bytes = io::encode(io::from_matrix(Matrix{{1.5, -2}}));
  REQUIRE(bytes.size() == 8 + 2 + 2 * 8 + 2 * 8);
  CHECK(std::memcmp(bytes.data(), "SQTENSR1", 8) == 0);
  CHECK(bytes[8] == 1);
  CHECK(bytes[9] == 2);
  CHECK(bytes[10] == 1);  // d0 = 1, little-endian
  CHECK(bytes[18] == 2);  // d1 = 2
  double first;
  std::memcpy(&first, bytes.data() + 26, 8);
  CHECK(first == 1.5);

  quant::IntMatrix im(1, 1);
  im(0, 0) = -3;
  const auto ib = io::encode(io::from_ints(im));
  CHECK(ib[8] == 2);
  CHECK(ib.size() == 8 + 2 + 16 + 4);
  CHECK(ib.back() == 0xff);
}

TEST_CASE("round trips are byte exact") {
  TempDir dir("sarqc_test_tensor_io");
  std::mt19937_64 rng(91);
  for (int t = 0; t < 50; ++t) {
    Matrix m = testutil::random_matrix(rng, testutil::uniform(rng, 1, 9), testutil::uniform(rng, 1, 9), 1e3);
    m(0, 0) = std::numeric_limits<double>::denorm_min();
    const auto p = dir.path / "m.sqt";
    io::write_matrix(p, m);
    const auto bytes = io::read_bytes(p);
    const Matrix back = io::read_matrix(p);
    CHECK(back == m);
    io::write_matrix(p, back);
    CHECK(io::read_bytes(p) == bytes);

    quant::IntMatrix im(testutil::uniform(rng, 1, 5), testutil::uniform(rng, 1, 5));
    for (auto& v : im.data) v = static_cast<std::int32_t>(testutil::uniform(rng, 0, 200)) - 100;
    const auto ip = dir.path / "c.sqt";
    io::write_ints(ip, im);
    const auto tensor = io::read_tensor(ip);
    CHECK(tensor == io::from_ints(im));
    CHECK(io::encode(tensor) == io::read_bytes(ip));
    const auto h = io::read_header(ip);
    CHECK(h.dtype == io::DType::I32);
    CHECK(h.dims == std::vector<std::uint64_t>{im.rows, im.cols});
  }
}

TEST_CASE("higher ranks") {
  io::Tensor t;
  t.dtype = io::DType::F64;
  t.dims = {2, 1, 3};
  t.f64 = {1, 2, 3, 4, 5, 6};
  CHECK(io::decode(io::encode(t)) == t);
  t.dims = {6};
  CHECK(io::decode(io::encode(t)) == t);
}

TEST_CASE("malformed input is rejected") {
  const auto good = io::encode(io::from_matrix(Matrix{{1, 2}, {3, 4}}));
  CHECK_NOTHROW(io::decode(good));

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(io::decode(bad_magic), IoError);

  auto bad_dtype = good;
  bad_dtype[8] = 7;
  CHECK_THROWS_AS(io::decode(bad_dtype), IoError);

  auto short_payload = good;
  short_payload.pop_back();
  CHECK_THROWS_AS(io::decode(short_payload), IoError);

  auto long_payload = good;
  long_payload.push_back(0);
  CHECK_THROWS_AS(io::decode(long_payload), IoError);

  CHECK_THROWS_AS(io::decode(std::vector<std::uint8_t>(good.begin(), good.begin() + 5)), IoError);

  auto huge_dim = good;
  for (int i = 0; i < 8; ++i) huge_dim[10 + i] = 0xff;
  CHECK_THROWS_AS(io::decode(huge_dim), IoError);
}

TEST_CASE("file level errors") {
  TempDir dir("sarqc_test_tensor_io_err");
  CHECK_THROWS_AS(io::read_matrix(dir.path / "missing.sqt"), IoError);

  quant::IntMatrix im(2, 2);
  io::write_ints(dir.path / "ints.sqt", im);
  CHECK_THROWS_AS(io::read_matrix(dir.path / "ints.sqt"), IoError);

  io::Tensor t;
  t.dtype = io::DType::F64;
  t.dims = {2};
  t.f64 = {1, std::nan("")};
  io::write_tensor(dir.path / "nan.sqt", t);
  CHECK_THROWS_AS(io::read_matrix(dir.path / "nan.sqt"), IoError);
  t.dims = {1, 2};
  io::write_tensor(dir.path / "nan2.sqt", t);
  CHECK_THROWS_AS(io::read_matrix(dir.path / "nan2.sqt"), IoError);
}
