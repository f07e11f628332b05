// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "sarqc/bench.hpp"
#include "sarqc/oracle.hpp"
#include "sarqc/quantizer.hpp"
#include "sarqc/solver_gbs.hpp"
#include "sarqc/solver_gs.hpp"
#include "sarqc/tensor_io.hpp"

using namespace sarqc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs >= limit_s) {
    o.passed = false;
    o.detail += " (over the " + std::to_string(static_cast<int>(limit_s)) + " s limit)";
  }
  if (!o.passed) ++failures;
  std::printf("%s %2d %-28s %7.2fs  %s\n", o.passed ? "PASS" : "FAIL", id, name, secs, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Outcome from_suite(const oracle::SuiteReport& r) {
  return {r.passed, std::to_string(r.trials) + " trials" +
                        (r.passed ? std::string() : ", counterexample " + r.counterexample.dump())};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SARQC_CLI) + " " + args + " > /dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome compensation() { return from_suite(oracle::run_compensation_suite({500, 0, 1, false})); }

Outcome gptq_recovery() { return from_suite(oracle::run_gptq_equiv_suite({100, 0, 1, false})); }

Outcome supportedness() {
  const std::vector<oracle::FiniteCandidate> q{{"A", 1.0, 4.0}, {"B", 0.5, 9.0}, {"C", 2.0, 1.0}};
  const auto iv = oracle::lambda_interval(q, "A", 4.0);
  const bool worked = std::abs(iv.lambda_min - 0.1) <= 1e-15 && std::abs(iv.lambda_max - 1.0 / 3.0) <= 1e-15;
  Outcome o = from_suite(oracle::run_supportedness_suite({1000, 0, 1, false}));
  o.passed = o.passed && worked && iv.supported;
  o.detail += fmt(", worked instance [%.4g, %.4g]", iv.lambda_min, iv.lambda_max);
  return o;
}

Outcome hoeffding() {
  const double bound = oracle::hoeffding_bound(1.0, 1.0, 16, 200, 0.05);
  const auto r = oracle::run_hoeffding_suite({2000, 0, 1, false});
  const double rate = r.detail.value("violation_rate", 1.0);
  const double threshold = 0.05 + 3.0 * std::sqrt(0.05 * 0.95 / 2000.0);
  return {r.passed && std::abs(bound - 0.1271) < 5e-5 && rate <= threshold,
          fmt("bound %.4f, violation rate %.4f <= %.4f", bound, rate, threshold)};
}

Outcome scalarization() { return from_suite(oracle::run_scalarization_suite({200, 0, 1, false})); }

Outcome tradeoff() {
  bench::SynthLayerSpec spec;
  quant::QuantScheme scheme;
  scheme.bits = 4;
  scheme.group_size = 32;
  std::vector<std::uint64_t> seeds(20);
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = i;
  const auto grid = bench::default_sweep_grid();
  const auto rec = bench::sweep_lambda(spec, scheme, bench::Method::Gbs, grid, seeds);
  int interior = 0, broken = 0, worst = 0;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const auto* r = &rec[s * grid.size()];
    std::size_t best = 0;
    int drift_v = 0, recon_v = 0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
      if (r[i].heldout_risk < r[best].heldout_risk) best = i;
      if (r[i].drift > r[i - 1].drift * 1.01) ++drift_v;
      if (r[i].recon < r[i - 1].recon * 0.99) ++recon_v;
    }
    if (best > 0 && best + 1 < grid.size()) ++interior;
    if (drift_v > 2 || recon_v > 2) ++broken;
    worst = std::max({worst, drift_v, recon_v});
  }
  const bool ok = broken == 0 && interior * 10 >= 6 * static_cast<int>(seeds.size());
  return {ok, fmt("interior minimum %.0f/20, worst violations per sweep %.0f, sweeps over budget %.0f",
                  interior, worst, broken)};
}

Outcome calib_scarcity() {
  bench::SynthLayerSpec spec;
  spec.d_in = 64;
  spec.d_out = 64;
  quant::QuantScheme scheme;
  scheme.group_size = 32;
  const auto rows = bench::calib_size_study(spec, scheme, {16, 32, 64, 128});
  bool ok = true;
  std::size_t widest = 0;
  std::string detail = "gap";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ok = ok && rows[i].median_selected <= rows[i].median_baseline;
    if (rows[i].relative_gap() > rows[widest].relative_gap()) widest = i;
    detail += fmt(" %.0f:%.3f", static_cast<double>(rows[i].size), rows[i].relative_gap());
  }
  return {ok && widest == 0, detail};
}

Outcome quantizer_contract() {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 1 << 20);
  std::size_t checked = 0;
  for (int t = 0; t < 500; ++t) {
    quant::QuantScheme s;
    s.bits = 2 + pick(rng) % 7;
    s.mode = pick(rng) % 2 ? quant::Mode::Symmetric : quant::Mode::Asymmetric;
    s.group_size = 1 + pick(rng) % 16;
    linalg::Matrix w(1 + pick(rng) % 8, 1 + pick(rng) % 40);
    for (double& v : w.data()) v = nd(rng) * 3.0;
    const auto q = quant::quantize_matrix(w, s);
    const std::size_t width = s.group_width(w.cols());
    for (std::size_t r = 0; r < w.rows(); ++r) {
      for (std::size_t c = 0; c < w.cols(); ++c) {
        const auto p = q.params(r, c / width);
        const double lo = p.scale * (s.code_min() - p.zero_point);
        const double hi = p.scale * (s.code_max() - p.zero_point);
        if (w(r, c) < lo || w(r, c) > hi) continue;
        ++checked;
        if (std::abs(q.dequantized(r, c) - w(r, c)) > p.scale / 2 * (1 + 1e-12)) {
          return {false, fmt("error above eta/2 at trial %.0f", t)};
        }
      }
    }
    if (!(quant::quantize_matrix(q.dequantized, s).codes == q.codes)) {
      return {false, fmt("re-quantization changed codes at trial %.0f", t)};
    }
    const auto bytes = io::encode(io::from_matrix(w));
    const auto back = io::decode(bytes);
    if (!(back == io::from_matrix(w)) || io::encode(back) != bytes) {
      return {false, fmt("tensor round trip differs at trial %.0f", t)};
    }
    const auto cb = io::encode(io::from_ints(q.codes));
    if (io::encode(io::decode(cb)) != cb) return {false, fmt("code tensor round trip differs at trial %.0f", t)};
  }
  return {true, fmt("500 matrices, %.0f in-range elements", static_cast<double>(checked))};
}

Outcome parallel_determinism() {
  const fs::path root = fs::temp_directory_path() / "sarqc_acceptance_jobs";
  fs::remove_all(root);
  fs::create_directories(root);
  if (run_cli("gen --layers 16 --seed 0 --out " + (root / "gen").string()) != 0) return {false, "gen failed"};
  const std::string base = "quantize --manifest " + (root / "gen" / "manifest.json").string() + " --group-size 32";
  if (run_cli(base + " --jobs 1 --out " + (root / "j1").string()) != 0) return {false, "quantize --jobs 1 failed"};
  if (run_cli(base + " --jobs 8 --out " + (root / "j8").string()) != 0) return {false, "quantize --jobs 8 failed"};
  std::map<std::string, std::string> a, b;
  for (const auto& [dir, out] : {std::pair{root / "j1", &a}, std::pair{root / "j8", &b}}) {
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().filename() != "timing.json") (*out)[e.path().filename().string()] = slurp(e.path());
    }
  }
  fs::remove_all(root);
  return {a == b && a.size() == 16 * 4 + 1, fmt("%.0f files compared", static_cast<double>(a.size()))};
}

Outcome default_grids() {
  std::vector<double> alpha;
  for (int k = 0; k <= 20; ++k) alpha.push_back(k / 20.0);
  const std::vector<double> gs_lambda{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  bool lam_ok = gs::default_lambda_grid().size() == gs_lambda.size();
  for (std::size_t i = 0; lam_ok && i < gs_lambda.size(); ++i) {
    lam_ok = std::abs(gs::default_lambda_grid()[i] - gs_lambda[i]) <= 1e-15;
  }
  const bool ok = gs::default_alpha_grid() == alpha && lam_ok &&
                  gbs::default_lambda_grid() == std::vector<double>{0.25, 0.5, 0.75} &&
                  gbs::default_gamma_grid() == std::vector<double>{0.1, 0.15, 0.35, 0.5};
  return {ok, "alpha k/20, GS lambda 0.1..1.0, GBS lambda {0.25,0.5,0.75}, gamma {0.1,0.15,0.35,0.5}"};
}

}  // namespace

int main() {
  criterion(1, "compensation oracle", 10, compensation);
  criterion(2, "gptq recovery", 30, gptq_recovery);
  criterion(3, "supportedness", 10, supportedness);
  criterion(4, "hoeffding coverage", 120, hoeffding);
  criterion(5, "scalarization monotonicity", 30, scalarization);
  criterion(6, "trade-off sweep", 120, tradeoff);
  criterion(7, "calibration scarcity", 180, calib_scarcity);
  criterion(8, "quantizer contract", 10, quantizer_contract);
  criterion(9, "parallel determinism", 60, parallel_determinism);
  criterion(10, "default grids", 10, default_grids);
  std::printf("%s: %d failure(s)\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
