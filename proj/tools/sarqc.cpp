// sarqc: batch calibration, sweeps, oracle verification and synthetic data.
//
// Exit codes: 0 ok, 1 verification failure, 2 invalid arguments,
// 3 I/O or parse failure, 4 numerical failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sarqc/bench.hpp"
#include "sarqc/calibration.hpp"
#include "sarqc/error.hpp"
#include "sarqc/oracle.hpp"
#include "sarqc/parallel.hpp"
#include "sarqc/pipeline.hpp"
#include "sarqc/solver_gbs.hpp"
#include "sarqc/solver_gs.hpp"
#include "sarqc/tensor_io.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sarqc;

constexpr int kOk = 0;
constexpr int kVerifyFailed = 1;
constexpr int kBadArgs = 2;
constexpr int kIoError = 3;
constexpr int kNumerical = 4;

struct SchemeFlags {
  std::optional<int> bits;
  std::optional<long long> group_size;
  std::optional<std::string> mode;
  std::optional<std::string> granularity;

  void add(CLI::App* app) {
    app->add_option("--bits", bits, "Bit width (2..16)");
    app->add_option("--group-size", group_size, "Input channels per group");
    app->add_option("--mode", mode, "sym or asym")->check(CLI::IsMember({"sym", "asym"}));
    app->add_option("--granularity", granularity, "group, per_channel or per_tensor")
        ->check(CLI::IsMember({"group", "per_channel", "per_tensor"}));
  }

  void apply(quant::QuantScheme& s) const {
    if (bits) s.bits = *bits;
    if (group_size) {
      if (*group_size <= 0) throw InvalidArgument("--group-size must be >= 1");
      s.group_size = static_cast<std::size_t>(*group_size);
    }
    if (mode) s.mode = quant::parse_mode(*mode);
    if (granularity) {
      s.granularity = *granularity == "group"         ? quant::Granularity::Group
                      : *granularity == "per_channel" ? quant::Granularity::PerChannel
                                                      : quant::Granularity::PerTensor;
    }
  }
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::size_t resolve_jobs(const std::optional<std::size_t>& jobs) {
  if (!jobs) return default_jobs();
  if (*jobs == 0) throw InvalidArgument("--jobs must be >= 1");
  return *jobs;
}

// ---- quantize --------------------------------------------------------------

struct QuantizeArgs {
  std::string manifest;
  std::string replay;
  std::optional<std::string> method;
  SchemeFlags scheme;
  std::optional<double> lambda;
  std::vector<double> lambda_grid;
  std::vector<double> gamma_grid;
  std::vector<double> alpha_grid;
  std::optional<std::size_t> block;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> saliency;
  std::string out;
  std::optional<std::size_t> jobs;
};

int cmd_quantize(const QuantizeArgs& a) {
  const std::size_t jobs = resolve_jobs(a.jobs);
  pipeline::RunConfig cfg;
  pipeline::Manifest manifest;
  if (!a.replay.empty()) {
    const json report = read_json_file(a.replay);
    if (!report.contains("config") || !report.at("config").contains("manifest")) {
      throw IoError(a.replay + ": no config echo");
    }
    cfg = pipeline::config_from_json(report.at("config"));
    manifest = pipeline::load_manifest(report.at("config").at("manifest").get<std::string>());
  } else {
    manifest = pipeline::load_manifest(a.manifest);
    pipeline::apply_defaults(cfg, manifest.defaults);
    if (a.method) cfg.method = pipeline::parse_quant_method(*a.method);
    a.scheme.apply(cfg.scheme);
    cfg.lambda = a.lambda;
    if (!a.lambda_grid.empty()) cfg.lambda_grid = a.lambda_grid;
    if (!a.gamma_grid.empty()) cfg.gamma_grid = a.gamma_grid;
    if (!a.alpha_grid.empty()) cfg.alpha_grid = a.alpha_grid;
    if (a.block) cfg.block_size = *a.block;
    if (a.seed) cfg.seed = *a.seed;
    if (a.saliency) cfg.identity_saliency = *a.saliency == "identity";
    cfg.resolve_defaults();
  }
  cfg.validate();
  const json report = pipeline::run_quantize(manifest, cfg, a.out, jobs);
  std::cout << "quantized " << report.at("layers").size() << " layer(s) with "
            << pipeline::to_string(cfg.method) << " -> " << a.out << "\n";
  return kOk;
}

// ---- sweep -----------------------------------------------------------------

struct SweepArgs {
  std::string spec;
  std::string manifest;
  std::string method = "sarqc-gbs";
  SchemeFlags scheme;
  std::vector<double> lambda_grid;
  double gamma = 0.5;
  std::size_t seeds = 1;
  std::uint64_t seed = 0;
  std::optional<std::size_t> block;
  std::optional<std::string> saliency;
  std::string out;
  std::string selection_table;
  std::vector<double> gamma_grid;
  std::optional<std::size_t> jobs;
};

// Validation table for the layer generated from the spec at --seed.
void write_selection_table(const SweepArgs& a, const bench::SynthLayerSpec& base,
                           const quant::QuantScheme& scheme, bench::Method method,
                           std::size_t block) {
  bench::SynthLayerSpec spec = base;
  spec.seed = a.seed;
  const bench::SynthInstance inst = bench::make_instance(spec);
  const CalibrationBatch batch(inst.x_calib, 0.25);
  std::vector<double> lambdas = a.lambda_grid;
  if (lambdas.empty()) {
    lambdas = method == bench::Method::Gs ? gs::default_lambda_grid() : gbs::default_lambda_grid();
  }
  const std::vector<double> gammas = a.gamma_grid.empty() ? gbs::default_gamma_grid() : a.gamma_grid;
  std::string csv = "lambda,gamma,val_loss\n";
  char buf[128];
  for (const auto& r : bench::selection_table(inst.w, batch, scheme, method, lambdas, gammas, block)) {
    std::snprintf(buf, sizeof buf, "%.17g,", r.lambda);
    csv += buf;
    if (r.gamma) {
      std::snprintf(buf, sizeof buf, "%.17g", *r.gamma);
      csv += buf;
    }
    std::snprintf(buf, sizeof buf, ",%.17g\n", r.val_loss);
    csv += buf;
  }
  write_file(a.selection_table, csv);
}

int cmd_sweep(const SweepArgs& a) {
  const std::size_t jobs = resolve_jobs(a.jobs);
  const bench::Method method = bench::parse_method(a.method);
  quant::QuantScheme scheme;
  a.scheme.apply(scheme);
  scheme.validate();
  const std::vector<double> grid = a.lambda_grid.empty() ? bench::default_sweep_grid() : a.lambda_grid;
  for (double l : grid) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw InvalidArgument("lambda grid values must be >= 0");
  }
  if (!(a.gamma >= 0.0 && a.gamma <= 1.0)) throw InvalidArgument("--gamma must lie in [0, 1]");
  if (a.seeds == 0) throw InvalidArgument("--seeds must be >= 1");

  bench::SweepOptions opts;
  opts.gamma = a.gamma;
  opts.identity_saliency = a.saliency && *a.saliency == "identity";
  if (a.block) {
    if (*a.block == 0) throw InvalidArgument("--block must be >= 1");
    opts.block_size = *a.block;
  }
  opts.jobs = jobs;

  std::vector<bench::SweepRecord> records;
  if (!a.manifest.empty()) {
    if (!a.selection_table.empty()) throw InvalidArgument("--selection-table needs --spec mode");
    // Each layer is swept once: its calibration tensor is split into a
    // calibration part and a held-out part. The seed column is the layer's
    // index in layer_id order.
    pipeline::Manifest m = pipeline::load_manifest(a.manifest);
    std::sort(m.layers.begin(), m.layers.end(),
              [](const auto& x, const auto& y) { return x.layer_id < y.layer_id; });
    std::vector<std::vector<bench::SweepRecord>> per_layer(m.layers.size());
    bench::SweepOptions inner = opts;
    inner.jobs = 1;
    parallel_for(m.layers.size(), jobs, [&](std::size_t i) {
      const linalg::Matrix w = io::read_matrix(m.layers[i].weights);
      const CalibrationBatch batch(io::read_matrix(m.layers[i].calib), 0.25);
      per_layer[i] = bench::sweep_layer(w, batch.train(), batch.val(), scheme, method, grid, i, inner);
    });
    for (auto& v : per_layer) records.insert(records.end(), v.begin(), v.end());
  } else {
    bench::SynthLayerSpec spec;
    if (!a.spec.empty()) spec = pipeline::spec_from_json(read_json_file(a.spec));
    if (!a.selection_table.empty()) {
      write_selection_table(a, spec, scheme, method, opts.block_size);
      if (a.out.empty()) return kOk;
    }
    std::vector<std::uint64_t> seeds(a.seeds);
    for (std::size_t i = 0; i < a.seeds; ++i) seeds[i] = a.seed + i;
    records = bench::sweep_lambda(spec, scheme, method, grid, seeds, opts);
  }

  std::string csv = bench::sweep_csv_header() + "\n";
  for (const auto& r : records) csv += bench::to_csv_row(r) + "\n";
  if (a.out.empty() || a.out == "-") {
    std::cout << csv;
  } else {
    write_file(a.out, csv);
    std::cout << "wrote " << records.size() << " row(s) to " << a.out << "\n";
  }
  return kOk;
}

// ---- verify ----------------------------------------------------------------

struct VerifyArgs {
  std::string suite = "all";
  std::optional<long long> trials;
  std::uint64_t seed = 0;
  std::string out;
  std::optional<std::size_t> jobs;
  std::string inject_fault;
};

int cmd_verify(const VerifyArgs& a) {
  oracle::SuiteOptions opts;
  opts.seed = a.seed;
  opts.jobs = resolve_jobs(a.jobs);
  if (a.trials) {
    if (*a.trials <= 0) throw InvalidArgument("--trials must be >= 1");
    opts.trials = static_cast<std::size_t>(*a.trials);
  }
  if (!a.inject_fault.empty()) {
    if (a.inject_fault != "compensation-sign") throw InvalidArgument("unknown fault '" + a.inject_fault + "'");
    opts.flip_compensation_sign = true;
  }

  using Runner = oracle::SuiteReport (*)(const oracle::SuiteOptions&);
  const std::vector<std::pair<std::string, Runner>> all = {
      {"compensation", oracle::run_compensation_suite},
      {"supportedness", oracle::run_supportedness_suite},
      {"hoeffding", oracle::run_hoeffding_suite},
      {"gptq-equiv", oracle::run_gptq_equiv_suite},
      {"scalarization", oracle::run_scalarization_suite},
  };
  std::vector<std::pair<std::string, Runner>> chosen;
  for (const auto& s : all) {
    if (a.suite == "all" || a.suite == s.first) chosen.push_back(s);
  }
  if (chosen.empty()) throw InvalidArgument("unknown suite '" + a.suite + "'");
  if (opts.trials != 0 && opts.trials < 1000 &&
      std::any_of(chosen.begin(), chosen.end(), [](const auto& s) { return s.first == "hoeffding"; })) {
    throw InvalidArgument("the hoeffding suite needs --trials >= 1000");
  }

  json suites = json::array();
  bool passed = true;
  for (const auto& [name, run] : chosen) {
    const oracle::SuiteReport r = run(opts);
    passed = passed && r.passed;
    std::cout << (r.passed ? "PASS " : "FAIL ") << name << " (" << r.trials << " trials)\n";
    suites.push_back({{"name", r.name},
                      {"passed", r.passed},
                      {"trials", r.trials},
                      {"detail", r.detail},
                      {"counterexample", r.counterexample}});
  }
  const json report = {{"schema", pipeline::kSchema},
                       {"version", pipeline::kVersion},
                       {"seed", a.seed},
                       {"passed", passed},
                       {"suites", suites}};
  if (!a.out.empty()) write_file(a.out, pipeline::dump(report));
  return passed ? kOk : kVerifyFailed;
}

// ---- gen -------------------------------------------------------------------

struct GenArgs {
  std::string spec;
  std::string out;
  std::uint64_t seed = 0;
  std::optional<std::size_t> layers;
};

int cmd_gen(const GenArgs& a) {
  bench::SynthLayerSpec spec;
  std::size_t layers = 1;
  if (!a.spec.empty()) spec = pipeline::spec_from_json(read_json_file(a.spec), &layers);
  if (a.layers) {
    if (*a.layers == 0) throw InvalidArgument("--layers must be >= 1");
    layers = *a.layers;
  }
  pipeline::generate(spec, layers, a.seed, a.out);
  std::cout << "generated " << layers << " layer(s) in " << a.out << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Saliency-aware regularized quantization calibration"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pipeline::kVersion));

  QuantizeArgs qa;
  auto* q = app.add_subcommand("quantize", "Quantize every layer of a manifest");
  auto* q_manifest = q->add_option("--manifest", qa.manifest, "Layer manifest (JSON)");
  auto* q_replay = q->add_option("--replay", qa.replay, "Re-run the config echoed in a report.json");
  q_manifest->excludes(q_replay);
  q->add_option("--method", qa.method, "rtn, awq, gptq, sarqc-gs or sarqc-gbs")
      ->check(CLI::IsMember({"rtn", "awq", "gptq", "sarqc-gs", "sarqc-gbs"}));
  qa.scheme.add(q);
  auto* q_lambda = q->add_option("--lambda", qa.lambda, "Fixed regularization strength");
  auto* q_grid = q->add_option("--lambda-grid", qa.lambda_grid, "Comma-separated λ grid")->delimiter(',');
  q_lambda->excludes(q_grid);
  q->add_option("--gamma-grid", qa.gamma_grid, "Comma-separated γ grid")->delimiter(',');
  q->add_option("--alpha-grid", qa.alpha_grid, "Comma-separated α grid")->delimiter(',');
  q->add_option("--block", qa.block, "Column block size for the sequential solver");
  q->add_option("--seed", qa.seed, "Master seed");
  q->add_option("--saliency", qa.saliency, "default or identity")
      ->check(CLI::IsMember({"default", "identity"}));
  q->add_option("--out", qa.out, "Output directory")->required();
  q->add_option("--jobs", qa.jobs, "Parallel layers (default $SARQC_JOBS or 1)");

  SweepArgs sa;
  auto* s = app.add_subcommand("sweep", "λ sweep on synthetic layers or a manifest");
  auto* s_spec = s->add_option("--spec", sa.spec, "Synthetic layer spec (JSON)");
  auto* s_manifest = s->add_option("--manifest", sa.manifest, "Layer manifest (JSON)");
  s_spec->excludes(s_manifest);
  s->add_option("--method", sa.method, "gs/sarqc-gs or gbs/sarqc-gbs")
      ->check(CLI::IsMember({"gs", "gbs", "sarqc-gs", "sarqc-gbs"}));
  sa.scheme.add(s);
  s->add_option("--lambda-grid", sa.lambda_grid, "Comma-separated λ grid")->delimiter(',');
  s->add_option("--gamma", sa.gamma, "GBS saliency exponent");
  s->add_option("--seeds", sa.seeds, "Number of seeds");
  s->add_option("--seed", sa.seed, "First seed");
  s->add_option("--block", sa.block, "Column block size");
  s->add_option("--saliency", sa.saliency, "default or identity")
      ->check(CLI::IsMember({"default", "identity"}));
  s->add_option("--out", sa.out, "CSV path ('-' for stdout)");
  s->add_option("--jobs", sa.jobs, "Parallel seeds (default $SARQC_JOBS or 1)");
  s->add_option("--selection-table", sa.selection_table,
                "Write the validation table behind λ/(λ, γ) selection for the --seed layer");
  s->add_option("--gamma-grid", sa.gamma_grid, "γ grid for --selection-table")->delimiter(',');

  VerifyArgs va;
  auto* v = app.add_subcommand("verify", "Run the oracle suites");
  v->add_option("--suite", va.suite,
                "compensation, supportedness, hoeffding, gptq-equiv, scalarization or all");
  v->add_option("--trials", va.trials, "Trials per suite (default: per-suite)");
  v->add_option("--seed", va.seed, "Master seed");
  v->add_option("--out", va.out, "JSON report path");
  v->add_option("--jobs", va.jobs, "Worker threads (default $SARQC_JOBS or 1)");
  v->add_option("--inject-fault", va.inject_fault)->group("");

  GenArgs ga;
  auto* g = app.add_subcommand("gen", "Write a synthetic manifest with weights and calibration data");
  g->add_option("--spec", ga.spec, "Synthetic layer spec (JSON)");
  g->add_option("--out", ga.out, "Output directory")->required();
  g->add_option("--seed", ga.seed, "Master seed");
  g->add_option("--layers", ga.layers, "Number of layers (overrides the spec)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kBadArgs;
  }

  try {
    if (*q) {
      if (qa.manifest.empty() && qa.replay.empty()) {
        throw InvalidArgument("quantize needs --manifest or --replay");
      }
      return cmd_quantize(qa);
    }
    if (*s) return cmd_sweep(sa);
    if (*v) return cmd_verify(va);
    if (*g) return cmd_gen(ga);
  } catch (const pipeline::LayerFailure& e) {
    std::cerr << "error: numerical failure in layer " << e.layer_id << ": " << e.what() << "\n";
    return kNumerical;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadArgs;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const NumericalFailure& e) {
    std::cerr << "error: numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  }
  return kBadArgs;
}
