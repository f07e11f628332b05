#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "sarqc/bench.hpp"
#include "sarqc/error.hpp"
#include "sarqc/solver_gs.hpp"

using namespace sarqc;
using linalg::Matrix;

namespace {

quant::QuantScheme sym(int bits, std::size_t group = 128) {
  quant::QuantScheme s;
  s.bits = bits;
  s.mode = quant::Mode::Symmetric;
  s.group_size = group;
  return s;
}

saliency::ChannelStats stats_of(std::vector<double> ax, std::vector<double> aw) {
  saliency::ChannelStats s;
  s.mean_abs_x = s.max_abs_x = std::move(ax);
  s.mean_abs_w = s.max_abs_w = std::move(aw);
  return s;
}

std::vector<std::vector<double>> read_csv(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell.empty() ? NAN : std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("default grids") {
  const auto a = gs::default_alpha_grid();
  REQUIRE(a.size() == 21);
  for (std::size_t k = 0; k <= 20; ++k) CHECK(a[k] == static_cast<double>(k) / 20.0);
  const auto l = gs::default_lambda_grid();
  REQUIRE(l.size() == 10);
  for (std::size_t k = 0; k < 10; ++k) CHECK(l[k] == doctest::Approx(0.1 * static_cast<double>(k + 1)).epsilon(1e-15));
}

TEST_CASE("config validation") {
  gs::GsConfig c;
  CHECK_NOTHROW(c.validate());
  c.alpha_grid = {0.5};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c.alpha_grid = {0.5, 0.2};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = gs::GsConfig{};
  c.lambda_grid = {};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c.lambda_grid = {-0.1};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("candidate worked example") {
  const Matrix w{{6, 0.5}};
  const auto q = gs::candidate(w, stats_of({1, 4}, {6, 0.5}), 1.0, sym(3));
  REQUIRE(q.channel_scale.size() == 2);
  CHECK(q.channel_scale[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(q.channel_scale[1] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(q.scales(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(q.codes(0, 0) == 3);
  CHECK(q.codes(0, 1) == 1);
  CHECK(q.dequantized(0, 0) == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(q.dequantized(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("unit scaling reproduces rtn bit for bit") {
  std::mt19937_64 rng(51);
  for (int t = 0; t < 100; ++t) {
    const std::size_t d = testutil::uniform(rng, 1, 12);
    const Matrix w = testutil::random_matrix(rng, 4, d);
    quant::QuantScheme s = sym(static_cast<int>(testutil::uniform(rng, 2, 6)), testutil::uniform(rng, 1, 6));
    if (t % 2) s.mode = quant::Mode::Asymmetric;
    const auto c = gs::candidate(w, stats_of(std::vector<double>(d, 2.0), std::vector<double>(d, 3.0)), 0.4, s);
    CHECK(c.dequantized == quant::rtn(w, s).dequantized);
    CHECK(c.codes == quant::rtn(w, s).codes);
  }
}

TEST_CASE("lossless candidates") {
  // Every channel has the same statistics, so s̃ = 1 for all α and ±7
  // sits on the 4-bit symmetric grid.
  const Matrix w{{-7, 7, 7, -7}, {7, -7, 7, 7}};
  const Matrix x{{1, -1}, {1, -1}, {1, -1}, {1, -1}};
  gs::GsConfig c;
  c.scheme = sym(4);
  c.lambda = 0.5;
  const auto r = gs::run_gs(w, x, c);
  CHECK(r.selected_index == 0);
  CHECK(r.chosen_alpha == c.alpha_grid[0]);
  CHECK(r.layer.dequantized == w);
  for (const auto& l : r.losses) CHECK(l.recon == 0.0);
}

TEST_CASE("select_candidate worked example") {
  const std::vector<double> recon{4, 2, 8}, sar{1, 3, 2};
  std::vector<double> rn, sn;
  CHECK(gs::select_candidate(recon, sar, 0.5, &rn, &sn) == 0);
  CHECK(rn[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(sn == std::vector<double>{0, 1, 0.5});
  CHECK(gs::select_candidate(recon, sar, 0.0) == 1);
  CHECK(gs::select_candidate(recon, sar, 10.0) == 0);
  // All tie.
  CHECK(gs::select_candidate(std::vector<double>{3, 3}, std::vector<double>{1, 1}, 1.0) == 0);
}

TEST_CASE("scalarization is monotone over a fixed candidate set") {
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  const auto grid = gs::default_lambda_grid();
  for (int t = 0; t < 500; ++t) {
    std::vector<double> recon(testutil::uniform(rng, 2, 21)), sar(recon.size());
    for (auto& v : recon) v = u(rng);
    for (auto& v : sar) v = u(rng);
    std::vector<double> rn, sn;
    std::vector<std::size_t> picks;
    std::vector<double> lambdas{0.0};
    lambdas.insert(lambdas.end(), grid.begin(), grid.end());
    for (double l : lambdas) picks.push_back(gs::select_candidate(recon, sar, l, &rn, &sn));
    for (std::size_t i = 1; i < picks.size(); ++i) {
      CHECK(sn[picks[i]] <= sn[picks[i - 1]]);
      CHECK(rn[picks[i]] >= rn[picks[i - 1]]);
    }
    CHECK(picks[0] == objective::argmin_lowest(recon));
  }
}

TEST_CASE("run_gs on random layers") {
  std::mt19937_64 rng(53);
  for (int t = 0; t < 10; ++t) {
    const Matrix w = testutil::random_matrix(rng, 6, 16);
    const Matrix x = testutil::random_matrix(rng, 16, 24);
    gs::GsConfig c;
    c.scheme.group_size = 8;
    c.lambda = 0.0;
    const auto r0 = gs::run_gs(w, x, c);
    std::vector<double> recon;
    for (const auto& l : r0.losses) recon.push_back(l.recon);
    CHECK(r0.selected_index == objective::argmin_lowest(recon));
    CHECK(r0.chosen_alpha == c.alpha_grid[r0.selected_index]);

    c.lambda = 0.3;
    const auto a = gs::run_gs(w, x, c);
    const auto b = gs::run_gs(w, x, c);
    CHECK(a.selected_index == b.selected_index);
    CHECK(a.layer.dequantized == b.layer.dequantized);
    CHECK(a.layer.codes == b.layer.codes);
    CHECK(a.recon_n == b.recon_n);
  }
}

TEST_CASE("select_lambda_gs") {
  std::mt19937_64 rng(54);
  const Matrix w = testutil::random_matrix(rng, 8, 16);
  const CalibrationBatch batch(testutil::random_matrix(rng, 16, 40), 0.25);
  gs::GsConfig c;
  c.scheme.group_size = 8;

  SUBCASE("singleton grid equals run_gs") {
    c.lambda_grid = {0.0};
    const auto s = gs::select_lambda_gs(w, batch, c);
    c.lambda = 0.0;
    const auto r = gs::run_gs(w, batch.train(), c);
    CHECK(s.chosen_lambda == 0.0);
    CHECK(s.layer.dequantized == r.layer.dequantized);
    CHECK(s.selected_index == r.selected_index);
  }
  SUBCASE("table argmin") {
    const auto s = gs::select_lambda_gs(w, batch, c);
    REQUIRE(s.validation_table.size() == c.lambda_grid.size());
    std::vector<double> v;
    for (const auto& [l, loss] : s.validation_table) v.push_back(loss);
    CHECK(s.chosen_lambda == c.lambda_grid[objective::argmin_lowest(v)]);
  }
  SUBCASE("lossless ties pick the smallest lambda") {
    const Matrix ww{{-7, 7}, {7, -7}};
    const CalibrationBatch b(Matrix{{1, 2, 3, 4}, {1, 2, 3, 4}}, 0.25);
    c.scheme = sym(4);
    const auto s = gs::select_lambda_gs(ww, b, c);
    CHECK(s.chosen_lambda == c.lambda_grid.front());
    CHECK(s.layer.dequantized == ww);
  }
}

TEST_CASE("select_lambda_gs agrees with the sweep selection table") {
  const auto dir = std::filesystem::temp_directory_path() / "sarqc_test_gs_table";
  std::filesystem::create_directories(dir);
  const auto csv = dir / "table.csv";
  const std::string cmd = std::string(SARQC_CLI) + " sweep --method sarqc-gs --seed 7 --selection-table " +
                          csv.string() + " > /dev/null";
  REQUIRE(std::system(cmd.c_str()) == 0);
  const auto rows = read_csv(csv);
  REQUIRE(rows.size() == gs::default_lambda_grid().size());
  std::vector<double> loss;
  for (const auto& r : rows) loss.push_back(r[2]);
  const double table_lambda = rows[objective::argmin_lowest(loss)][0];

  bench::SynthLayerSpec spec;
  spec.seed = 7;
  const auto inst = bench::make_instance(spec);
  const auto s = gs::select_lambda_gs(inst.w, CalibrationBatch(inst.x_calib, 0.25), gs::GsConfig{});
  CHECK(s.chosen_lambda == table_lambda);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(s.validation_table[i].first == rows[i][0]);
    CHECK(s.validation_table[i].second == doctest::Approx(rows[i][2]).epsilon(1e-12));
  }
  std::filesystem::remove_all(dir);
}
