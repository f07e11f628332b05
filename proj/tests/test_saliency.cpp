#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "sarqc/error.hpp"
#include "sarqc/saliency.hpp"

using namespace sarqc;
using linalg::Matrix;
using saliency::ChannelStats;

namespace {

ChannelStats stats_of(std::vector<double> ax, std::vector<double> aw) {
  ChannelStats s;
  s.mean_abs_x = ax;
  s.max_abs_x = ax;
  s.mean_abs_w = aw;
  s.max_abs_w = aw;
  return s;
}

ChannelStats random_stats(std::mt19937_64& rng, std::size_t d) {
  std::uniform_real_distribution<double> u(0.01, 10.0);
  std::vector<double> ax(d), aw(d);
  for (std::size_t j = 0; j < d; ++j) {
    ax[j] = u(rng);
    aw[j] = u(rng);
  }
  return stats_of(ax, aw);
}

}  // namespace

TEST_CASE("channel_stats examples") {
  const auto s = saliency::channel_stats(Matrix::identity(2), Matrix::identity(2));
  CHECK(s.mean_abs_x == std::vector<double>{0.5, 0.5});
  CHECK(s.mean_abs_w == std::vector<double>{0.5, 0.5});
  CHECK(s.max_abs_x == std::vector<double>{1.0, 1.0});

  const auto ones = saliency::channel_stats(Matrix(2, 2, 1.0), Matrix(2, 2, 1.0));
  CHECK(ones.mean_abs_x == std::vector<double>{1.0, 1.0});
  CHECK(ones.mean_abs_w == std::vector<double>{1.0, 1.0});

  // Column 1 of W and row 1 of X are zero.
  const auto z = saliency::channel_stats(Matrix{{1, 0}, {-3, 0}}, Matrix{{2, -2, 2}, {0, 0, 0}});
  CHECK(z.mean_abs_w == std::vector<double>{2.0, saliency::kStatFloor});
  CHECK(z.mean_abs_x == std::vector<double>{2.0, saliency::kStatFloor});
  CHECK(z.max_abs_x[1] == saliency::kStatFloor);

  CHECK_THROWS_AS(saliency::channel_stats(Matrix(2, 3), Matrix(2, 4)), InvalidArgument);
}

TEST_CASE("channel_stats invariants") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 100; ++t) {
    const std::size_t d = testutil::uniform(rng, 1, 10);
    const auto s = saliency::channel_stats(testutil::random_matrix(rng, 3, d), testutil::random_matrix(rng, d, 7));
    for (std::size_t j = 0; j < d; ++j) {
      CHECK(s.mean_abs_x[j] > 0.0);
      CHECK(s.mean_abs_x[j] <= s.max_abs_x[j]);
      CHECK(s.mean_abs_w[j] <= s.max_abs_w[j]);
    }
  }
}

TEST_CASE("scaling_vector_gs examples") {
  const auto u = saliency::scaling_vector_gs(stats_of({3, 3, 3}, {2, 2, 2}), 0.7);
  for (double v : u) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));

  const auto s = saliency::scaling_vector_gs(stats_of({4, 1}, {1, 1}), 0.5);
  CHECK(s[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(s[1] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));

  // α = 0: proportional to 1 / mean|W|.
  const auto a0 = saliency::scaling_vector_gs(stats_of({5, 9, 1}, {1, 2, 4}), 0.0);
  CHECK(a0[0] / a0[1] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(a0[0] / a0[2] == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("scaling_vector_gs normalization fixed point") {
  std::mt19937_64 rng(32);
  for (int t = 0; t < 500; ++t) {
    const auto st = random_stats(rng, testutil::uniform(rng, 1, 16));
    const double alpha = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto s = saliency::scaling_vector_gs(st, alpha);
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    CHECK(std::abs(*lo * *hi - 1.0) <= 1e-10);
    for (double v : s) CHECK(v > 0.0);
  }
}

TEST_CASE("saliency_vector_gs examples") {
  const auto eq = saliency::saliency_vector_gs(stats_of({2, 2}, {2, 2}));
  CHECK(eq.values == std::vector<double>{1.0, 1.0});
  CHECK(eq.kind == saliency::ProfileKind::GS);

  CHECK(saliency::saliency_vector_gs(stats_of({2, 8}, {1, 2})).values == std::vector<double>{2.0, 4.0});
  const auto z = saliency::saliency_vector_gs(stats_of({saliency::kStatFloor, 1}, {4, 1}));
  CHECK(z.values[0] == saliency::kStatFloor / 4);
}

TEST_CASE("saliency_vector_gbs examples") {
  CHECK(saliency::saliency_vector_gbs(stats_of({4}, {1}), 0.5)[0] == doctest::Approx(2.0).epsilon(1e-15));
  const auto st = stats_of({0.3, 7, 2}, {5, 0.1, 2});
  const auto g1 = saliency::saliency_vector_gbs(st, 1.0);
  for (std::size_t j = 0; j < 3; ++j) CHECK(g1[j] == doctest::Approx(st.mean_abs_x[j]).epsilon(1e-15));
  const auto c = saliency::saliency_vector_gbs(stats_of({3, 3, 3}, {2, 2, 2}), 0.25);
  CHECK(c[0] == c[1]);
  CHECK(c[1] == c[2]);
}

TEST_CASE("scale_normalize_gbs examples") {
  const auto ones = saliency::scale_normalize_gbs({3, 3, 3}, 1.0);
  for (double v : ones.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
  const auto two = saliency::scale_normalize_gbs({1, 1}, 4.0, 0.5);
  CHECK(two.values[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(two.values[1] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(two.kind == saliency::ProfileKind::GBS);
  CHECK(two.gamma == 0.5);
  CHECK(two.h_bar == 4.0);
  CHECK_THROWS_AS(saliency::scale_normalize_gbs({1, 1}, 0.0), InvalidArgument);
  CHECK_THROWS_AS(saliency::scale_normalize_gbs({1, 1}, -2.0), InvalidArgument);
}

TEST_CASE("scale_normalize_gbs hits the target energy") {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> u(0.001, 50.0);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> s(testutil::uniform(rng, 1, 20));
    for (double& v : s) v = u(rng);
    const double h = u(rng);
    const auto p = saliency::scale_normalize_gbs(s, h);
    double e = 0.0;
    for (double v : p.values) {
      CHECK(v > 0.0);
      e += v * v;
    }
    CHECK(std::abs(e / static_cast<double>(s.size()) - h) <= 1e-12 * h);
  }
}

TEST_CASE("gbs profile is invariant to a global activation scale") {
  std::mt19937_64 rng(34);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int t = 0; t < 200; ++t) {
    auto st = random_stats(rng, testutil::uniform(rng, 2, 12));
    const double gamma = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const double c = u(rng);
    const auto base = saliency::saliency_vector_gbs(st, gamma);
    auto scaled = st;
    for (double& v : scaled.mean_abs_x) v *= c;
    const auto s2 = saliency::saliency_vector_gbs(scaled, gamma);
    for (std::size_t j = 0; j < base.size(); ++j) {
      CHECK(s2[j] == doctest::Approx(base[j] * std::pow(c, gamma)).epsilon(1e-12));
    }
    const auto p1 = saliency::scale_normalize_gbs(base, 2.5);
    const auto p2 = saliency::scale_normalize_gbs(s2, 2.5);
    for (std::size_t j = 0; j < base.size(); ++j) CHECK(std::abs(p1.values[j] - p2.values[j]) <= 1e-10);
  }
}

TEST_CASE("identity profile") {
  const auto p = saliency::SaliencyProfile::identity(4);
  CHECK(p.values == std::vector<double>(4, 1.0));
  CHECK(p.kind == saliency::ProfileKind::Identity);
}
