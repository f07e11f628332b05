#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "sarqc/error.hpp"
#include "sarqc/linalg.hpp"

using namespace sarqc;
using linalg::Matrix;

TEST_CASE("matrix construction rejects non-finite entries and bad shapes") {
  CHECK_THROWS_AS(Matrix(1, 2, std::vector<double>{1.0, NAN}), InvalidArgument);
  CHECK_THROWS_AS(Matrix(1, 1, std::vector<double>{INFINITY}), InvalidArgument);
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1.0, 2.0, 3.0}), InvalidArgument);
  const Matrix m{{1, 2, 3}, {4, 5, 6}};
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m(1, 2) == 6);
  CHECK(m.transpose()(2, 1) == 6);
  CHECK(m.block(0, 1, 2, 2) == Matrix{{2, 3}, {5, 6}});
}

TEST_CASE("gram") {
  CHECK(linalg::gram(Matrix::identity(2)) == Matrix::identity(2));
  CHECK(linalg::gram(Matrix(3, 4)) == Matrix(3, 3));
  CHECK(linalg::gram(Matrix{{1, 2}, {0, 1}}) == Matrix{{5, 2}, {2, 1}});

  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    const Matrix x = testutil::random_matrix(rng, testutil::uniform(rng, 1, 12), testutil::uniform(rng, 1, 30));
    const Matrix g = linalg::gram(x);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) REQUIRE(g(i, j) == g(j, i));
    }
    CHECK(testutil::max_abs_diff(g, linalg::matmul(x, x.transpose())) <= 1e-12 * (1.0 + linalg::frobenius_sq(x)));
  }
}

TEST_CASE("frobenius_sq") {
  CHECK(linalg::frobenius_sq(Matrix(2, 3)) == 0.0);
  CHECK(linalg::frobenius_sq(Matrix::identity(3)) == 3.0);
  CHECK(linalg::frobenius_sq(Matrix{{1, 2}, {3, 4}}) == 30.0);

  std::mt19937_64 rng(12);
  for (int t = 0; t < 200; ++t) {
    const Matrix a = testutil::random_matrix(rng, testutil::uniform(rng, 1, 9), testutil::uniform(rng, 1, 9));
    CHECK(linalg::frobenius_sq(a) >= 0.0);
    // Transposition must not change the result, not even in the last bit.
    CHECK(linalg::frobenius_sq(a) == linalg::frobenius_sq(a.transpose()));
  }
}

TEST_CASE("chol_upper_of_inverse on small fixtures") {
  const auto m4 = linalg::chol_upper_of_inverse(Matrix{{4, 0}, {0, 4}}, 1e-6);
  CHECK(m4(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(m4(1, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(m4(0, 1) == 0.0);
  CHECK(m4(1, 0) == 0.0);
  CHECK(m4.jitter_used == 0.0);

  const auto mi = linalg::chol_upper_of_inverse(Matrix::identity(3), 1e-6);
  CHECK(testutil::max_abs_diff(mi.to_matrix(), Matrix::identity(3)) <= 1e-15);

  const Matrix g{{2, 1}, {1, 2}};
  const Matrix m = linalg::chol_upper_of_inverse(g, 1e-6).to_matrix();
  // Explicit inverse of [[2,1],[1,2]] is [[2/3,−1/3],[−1/3,2/3]].
  const Matrix mtm = linalg::matmul(m.transpose(), m);
  CHECK(mtm(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(mtm(0, 1) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  CHECK(testutil::max_abs_diff(linalg::matmul(mtm, g), Matrix::identity(2)) <= 1e-10);
}

TEST_CASE("chol_upper_of_inverse: random SPD, triangular with positive diagonal") {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = testutil::uniform(rng, 1, 16);
    const Matrix g = testutil::random_spd(rng, d);
    const auto f = linalg::chol_upper_of_inverse(g, linalg::default_jitter(g));
    for (std::size_t i = 0; i < d; ++i) {
      REQUIRE(f(i, i) > 0.0);
      for (std::size_t j = 0; j < i; ++j) REQUIRE(f(i, j) == 0.0);
    }
    const Matrix m = f.to_matrix();
    const Matrix r = linalg::matmul(linalg::matmul(m.transpose(), m), g);
    CHECK(testutil::max_abs_diff(r, Matrix::identity(d)) <= 1e-8);
  }
}

TEST_CASE("jitter policy") {
  // Singular PSD: needs jitter, which is recorded and is base·2^k.
  const Matrix g{{1, 1}, {1, 1}};
  const auto f = linalg::chol_upper_of_inverse(g, 1e-6);
  CHECK(f.jitter_used > 0.0);
  const double k = std::log2(f.jitter_used / 1e-6);
  CHECK(k == doctest::Approx(std::round(k)));
  CHECK(k <= linalg::kMaxJitterRetries);

  CHECK(linalg::default_jitter(Matrix{{2, 0}, {0, 4}}) == doctest::Approx(3e-6));
  CHECK(linalg::default_jitter(Matrix(2, 2)) == 1e-6);

  // Strongly indefinite: jitter cannot rescue it.
  const Matrix bad{{-1e6, 0}, {0, 1}};
  CHECK_THROWS_AS(linalg::chol_upper_of_inverse(bad, 1e-6, "layer.q"), NumericalFailure);
  try {
    linalg::chol_upper_of_inverse(bad, 1e-6, "layer.q");
  } catch (const NumericalFailure& e) {
    CHECK(std::string(e.what()).find("layer.q") != std::string::npos);
  }
}

TEST_CASE("solve_spd") {
  auto close = [](const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  };
  close(linalg::solve_spd(Matrix::identity(2), std::vector<double>{1, 2}), {1, 2});
  close(linalg::solve_spd(Matrix{{2, 0}, {0, 2}}, std::vector<double>{4, 6}), {2, 3});
  close(linalg::solve_spd(Matrix{{2, 1}, {1, 2}}, std::vector<double>{3, 3}), {1, 1});

  std::mt19937_64 rng(14);
  std::normal_distribution<double> nd(0.0, 3.0);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = testutil::uniform(rng, 1, 32);
    const Matrix g = testutil::random_spd(rng, d, 0.5);
    std::vector<double> b(d);
    double binf = 0.0;
    for (double& v : b) {
      v = nd(rng);
      binf = std::max(binf, std::abs(v));
    }
    const auto y = linalg::solve_spd(g, b);
    const auto gy = linalg::matvec(g, y);
    double res = 0.0;
    for (std::size_t i = 0; i < d; ++i) res = std::max(res, std::abs(gy[i] - b[i]));
    REQUIRE(res <= 1e-9 * (1.0 + binf));
  }
}

TEST_CASE("dimension mismatches") {
  CHECK_THROWS_AS(linalg::matmul(Matrix(2, 3), Matrix(2, 3)), InvalidArgument);
  CHECK_THROWS_AS(Matrix(2, 2) - Matrix(2, 3), InvalidArgument);
  CHECK_THROWS_AS(linalg::solve_spd(Matrix::identity(2), std::vector<double>{1, 2, 3}), InvalidArgument);
  CHECK_THROWS_AS(linalg::chol_upper_of_inverse(Matrix(2, 3), 1e-6), InvalidArgument);
}
