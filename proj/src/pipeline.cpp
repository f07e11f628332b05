#include "sarqc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include "sarqc/calibration.hpp"
#include "sarqc/error.hpp"
#include "sarqc/parallel.hpp"
#include "sarqc/rng.hpp"
#include "sarqc/saliency.hpp"
#include "sarqc/solver_gbs.hpp"
#include "sarqc/solver_gs.hpp"
#include "sarqc/tensor_io.hpp"

namespace sarqc::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(QuantMethod m) {
  switch (m) {
    case QuantMethod::Rtn: return "rtn";
    case QuantMethod::Awq: return "awq";
    case QuantMethod::Gptq: return "gptq";
    case QuantMethod::SarqcGs: return "sarqc-gs";
    case QuantMethod::SarqcGbs: return "sarqc-gbs";
  }
  return "?";
}

QuantMethod parse_quant_method(const std::string& s) {
  if (s == "rtn") return QuantMethod::Rtn;
  if (s == "awq") return QuantMethod::Awq;
  if (s == "gptq") return QuantMethod::Gptq;
  if (s == "sarqc-gs") return QuantMethod::SarqcGs;
  if (s == "sarqc-gbs") return QuantMethod::SarqcGbs;
  throw InvalidArgument("unknown method '" + s + "'");
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw IoError(where + ": missing \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw IoError(where + ": bad value for \"" + key + "\"");
  }
}

std::string granularity_name(quant::Granularity g) {
  switch (g) {
    case quant::Granularity::Group: return "group";
    case quant::Granularity::PerChannel: return "per_channel";
    case quant::Granularity::PerTensor: return "per_tensor";
  }
  return "?";
}

quant::Granularity parse_granularity(const std::string& s) {
  if (s == "group") return quant::Granularity::Group;
  if (s == "per_channel") return quant::Granularity::PerChannel;
  if (s == "per_tensor") return quant::Granularity::PerTensor;
  throw InvalidArgument("unknown granularity '" + s + "'");
}

json scheme_json(const quant::QuantScheme& s) {
  return {{"bits", s.bits},
          {"mode", quant::to_string(s.mode)},
          {"granularity", granularity_name(s.granularity)},
          {"group_size", s.group_size},
          {"rounding", "half_to_even"}};
}

void apply_scheme(quant::QuantScheme& s, const json& j) {
  if (!j.is_object()) throw InvalidArgument("scheme must be an object");
  if (j.contains("bits")) s.bits = j.at("bits").get<int>();
  if (j.contains("mode")) s.mode = quant::parse_mode(j.at("mode").get<std::string>());
  if (j.contains("granularity")) {
    s.granularity = parse_granularity(j.at("granularity").get<std::string>());
  }
  if (j.contains("group_size")) s.group_size = j.at("group_size").get<std::size_t>();
  if (j.contains("rounding") && j.at("rounding").get<std::string>() != "half_to_even") {
    throw InvalidArgument("only half_to_even rounding is supported");
  }
}

}  // namespace

bool valid_layer_id(const std::string& id) {
  if (id.empty() || id.size() > 128 || id.front() == '.') return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '-' || c == '.';
  });
}

Manifest load_manifest(const fs::path& path) {
  const json j = read_json(path);
  const std::string where = path.string();
  if (!j.is_object()) throw IoError(where + ": manifest must be a JSON object");
  if (field<int>(j, "schema", where) != kSchema) {
    throw IoError(where + ": unsupported schema version");
  }
  Manifest m;
  m.path = fs::absolute(path);
  const fs::path base = m.path.parent_path();
  if (j.contains("defaults")) m.defaults = j.at("defaults");
  if (!m.defaults.is_object()) throw IoError(where + ": \"defaults\" must be an object");
  const json& layers = j.contains("layers") ? j.at("layers") : json();
  if (!layers.is_array() || layers.empty()) throw IoError(where + ": \"layers\" must be a nonempty list");

  std::set<std::string> seen;
  for (const json& l : layers) {
    LayerEntry e;
    e.layer_id = field<std::string>(l, "layer_id", where);
    const std::string lw = where + " layer '" + e.layer_id + "'";
    if (!valid_layer_id(e.layer_id)) throw IoError(lw + ": invalid layer id");
    if (!seen.insert(e.layer_id).second) throw IoError(lw + ": duplicate layer id");
    e.weights = base / field<std::string>(l, "weights", lw);
    e.calib = base / field<std::string>(l, "calib", lw);
    e.d_out = field<std::size_t>(l, "d_out", lw);
    e.d_in = field<std::size_t>(l, "d_in", lw);
    e.n = field<std::size_t>(l, "n", lw);
    for (const fs::path& p : {e.weights, e.calib}) {
      if (!fs::is_regular_file(p)) throw IoError(lw + ": missing file " + p.string());
    }
    const io::TensorHeader hw = io::read_header(e.weights);
    const io::TensorHeader hx = io::read_header(e.calib);
    const std::vector<std::uint64_t> want_w{e.d_out, e.d_in};
    const std::vector<std::uint64_t> want_x{e.d_in, e.n};
    if (hw.dtype != io::DType::F64 || hw.dims != want_w) {
      throw IoError(lw + ": weights tensor does not match d_out x d_in");
    }
    if (hx.dtype != io::DType::F64 || hx.dims != want_x) {
      throw IoError(lw + ": calibration tensor does not match d_in x n");
    }
    m.layers.push_back(std::move(e));
  }
  return m;
}

void RunConfig::resolve_defaults() {
  if (lambda_grid.empty()) {
    lambda_grid = method == QuantMethod::SarqcGs ? gs::default_lambda_grid()
                                                 : gbs::default_lambda_grid();
  }
  if (gamma_grid.empty()) gamma_grid = gbs::default_gamma_grid();
  if (alpha_grid.empty()) alpha_grid = gs::default_alpha_grid();
}

void RunConfig::validate() const {
  scheme.validate();
  if (block_size == 0) throw InvalidArgument("block size must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw InvalidArgument("validation fraction must lie in (0, 1)");
  }
  if (lambda && !(std::isfinite(*lambda) && *lambda >= 0.0)) {
    throw InvalidArgument("lambda must be finite and >= 0");
  }
  auto check = [](const std::vector<double>& g, const char* name, bool unit) {
    for (double v : g) {
      if (!std::isfinite(v) || v < 0.0 || (unit && v > 1.0)) {
        throw InvalidArgument(std::string("bad value in ") + name + " grid");
      }
    }
  };
  check(lambda_grid, "lambda", false);
  check(gamma_grid, "gamma", true);
  check(alpha_grid, "alpha", true);
}

json to_json(const RunConfig& c) {
  json j = {{"method", to_string(c.method)},
            {"scheme", scheme_json(c.scheme)},
            {"lambda_grid", c.lambda_grid},
            {"gamma_grid", c.gamma_grid},
            {"alpha_grid", c.alpha_grid},
            {"saliency", c.identity_saliency ? "identity" : "default"},
            {"block", c.block_size},
            {"seed", c.seed},
            {"val_fraction", c.val_fraction}};
  j["lambda"] = c.lambda ? json(*c.lambda) : json(nullptr);
  return j;
}

RunConfig config_from_json(const json& j) {
  try {
    RunConfig c;
    c.method = parse_quant_method(j.at("method").get<std::string>());
    apply_scheme(c.scheme, j.at("scheme"));
    if (!j.at("lambda").is_null()) c.lambda = j.at("lambda").get<double>();
    c.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
    c.gamma_grid = j.at("gamma_grid").get<std::vector<double>>();
    c.alpha_grid = j.at("alpha_grid").get<std::vector<double>>();
    c.identity_saliency = j.at("saliency").get<std::string>() == "identity";
    c.block_size = j.at("block").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.val_fraction = j.at("val_fraction").get<double>();
    return c;
  } catch (const json::exception& e) {
    throw IoError(std::string("config echo: ") + e.what());
  }
}

void apply_defaults(RunConfig& c, const json& d) {
  try {
    if (d.contains("scheme")) apply_scheme(c.scheme, d.at("scheme"));
    if (d.contains("method")) c.method = parse_quant_method(d.at("method").get<std::string>());
    if (d.contains("grids")) {
      const json& g = d.at("grids");
      if (g.contains("lambda")) c.lambda_grid = g.at("lambda").get<std::vector<double>>();
      if (g.contains("gamma")) c.gamma_grid = g.at("gamma").get<std::vector<double>>();
      if (g.contains("alpha")) c.alpha_grid = g.at("alpha").get<std::vector<double>>();
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("manifest defaults: ") + e.what());
  }
}

LayerResult quantize_layer(const std::string& layer_id, const linalg::Matrix& w,
                           const linalg::Matrix& x, const RunConfig& config) {
  if (x.rows() != w.cols()) throw InvalidArgument("calibration d_in does not match weights");
  const auto start = std::chrono::steady_clock::now();
  const CalibrationBatch batch(x, config.val_fraction);
  const linalg::Matrix x_train = batch.train();
  const linalg::Matrix x_val = batch.val();

  LayerResult r;
  r.layer_id = layer_id;
  r.method = to_string(config.method);

  gs::GsConfig gs_cfg;
  gs_cfg.alpha_grid = config.alpha_grid;
  gs_cfg.lambda_grid = config.lambda_grid;
  gs_cfg.scheme = config.scheme;
  gs_cfg.val_fraction = config.val_fraction;
  gs_cfg.saliency_kind = config.identity_saliency ? gs::SaliencyKind::Identity : gs::SaliencyKind::GS;

  switch (config.method) {
    case QuantMethod::Rtn:
      r.layer = quant::rtn(w, config.scheme);
      break;
    case QuantMethod::Awq: {
      gs_cfg.lambda = 0.0;
      gs::GsResult g = gs::run_gs(w, x_train, gs_cfg);
      r.alpha = g.chosen_alpha;
      r.layer = std::move(g.layer);
      break;
    }
    case QuantMethod::SarqcGs: {
      gs::GsResult g;
      if (config.lambda) {
        gs_cfg.lambda = *config.lambda;
        g = gs::run_gs(w, x_train, gs_cfg);
      } else {
        g = gs::select_lambda_gs(w, batch, gs_cfg);
      }
      r.alpha = g.chosen_alpha;
      r.lambda = g.chosen_lambda;
      r.layer = std::move(g.layer);
      break;
    }
    case QuantMethod::Gptq: {
      const auto curv =
          gbs::build_curvature(x_train, saliency::SaliencyProfile::identity(w.cols()), 0.0);
      r.jitter_used = curv.jitter_used;
      r.layer = gbs::run_gbs(w, curv, config.scheme, config.block_size);
      break;
    }
    case QuantMethod::SarqcGbs: {
      gbs::GbsConfig cfg;
      cfg.lambda_grid = config.lambda ? std::vector<double>{*config.lambda} : config.lambda_grid;
      cfg.gamma_grid = config.gamma_grid;
      cfg.block_size = config.block_size;
      cfg.saliency_kind =
          config.identity_saliency ? gbs::SaliencyKind::Identity : gbs::SaliencyKind::GBS;
      cfg.scheme = config.scheme;
      cfg.val_fraction = config.val_fraction;
      gbs::GbsSelection sel = gbs::select_hparams_gbs(w, batch, cfg);
      r.lambda = sel.lambda;
      if (!config.identity_saliency) r.gamma = sel.gamma;
      r.jitter_used = sel.curvature.jitter_used;
      r.layer = std::move(sel.layer);
      break;
    }
  }

  // The reported sar term uses one method-independent profile so that
  // reports from different methods are comparable.
  const saliency::SaliencyProfile profile =
      saliency::saliency_vector_gs(saliency::channel_stats(w, x_train));
  r.losses = objective::breakdown(w, r.layer.dequantized, x_train, profile);
  r.heldout_risk = bench::evaluate(w, r.layer, x_val).heldout_risk;
  r.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

json layer_report(const LayerResult& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"layer_id", r.layer_id},
          {"method", r.method},
          {"lambda", opt(r.lambda)},
          {"gamma", opt(r.gamma)},
          {"alpha", opt(r.alpha)},
          {"losses", {{"recon", r.losses.recon}, {"sar", r.losses.sar}, {"drift", r.losses.drift}}},
          {"drift", r.losses.drift},
          {"heldout_risk", r.heldout_risk},
          {"jitter_used", r.jitter_used}};
}

json run_quantize(const Manifest& manifest, const RunConfig& config, const fs::path& out_dir,
                  std::size_t jobs) {
  config.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw IoError("cannot create output directory " + out_dir.string());

  std::vector<LayerEntry> layers = manifest.layers;
  std::sort(layers.begin(), layers.end(),
            [](const LayerEntry& a, const LayerEntry& b) { return a.layer_id < b.layer_id; });
  std::vector<json> entries(layers.size());
  std::vector<double> times(layers.size());

  parallel_for(layers.size(), jobs, [&](std::size_t i) {
    const LayerEntry& e = layers[i];
    const linalg::Matrix w = io::read_matrix(e.weights);
    const linalg::Matrix x = io::read_matrix(e.calib);
    LayerResult r;
    try {
      r = quantize_layer(e.layer_id, w, x, config);
    } catch (const NumericalFailure& err) {
      throw LayerFailure(e.layer_id, err.what());
    }
    const fs::path stem = out_dir / e.layer_id;
    io::write_ints(stem.string() + ".codes.sqt", r.layer.codes);
    io::write_matrix(stem.string() + ".scales.sqt", r.layer.scales);
    io::write_ints(stem.string() + ".zeros.sqt", r.layer.zero_points);
    io::write_matrix(stem.string() + ".dequant.sqt", r.layer.dequantized);
    if (!r.layer.channel_scale.empty()) {
      io::Tensor t;
      t.dims = {r.layer.channel_scale.size()};
      t.f64 = r.layer.channel_scale;
      io::write_tensor(stem.string() + ".channel_scale.sqt", t);
    }
    entries[i] = layer_report(r);
    times[i] = r.wall_time_ms;
  });

  json config_echo = to_json(config);
  config_echo["manifest"] = manifest.path.string();
  const json report = {{"schema", kSchema},
                       {"version", kVersion},
                       {"seed", config.seed},
                       {"config", config_echo},
                       {"layers", entries}};
  write_text(out_dir / "report.json", dump(report));

  json timing = {{"schema", kSchema}, {"layers", json::array()}};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    timing["layers"].push_back({{"layer_id", layers[i].layer_id}, {"wall_time_ms", times[i]}});
  }
  write_text(out_dir / "timing.json", dump(timing));
  return report;
}

bench::SynthLayerSpec spec_from_json(const json& j, std::size_t* layers) {
  if (!j.is_object()) throw InvalidArgument("spec must be a JSON object");
  bench::SynthLayerSpec s;
  try {
    auto get = [&](const char* key, auto& slot) {
      if (j.contains(key)) slot = j.at(key).get<std::decay_t<decltype(slot)>>();
    };
    get("d_out", s.d_out);
    get("d_in", s.d_in);
    get("outlier_channels", s.outlier_channels);
    get("outlier_scale", s.outlier_scale);
    get("weight_std", s.weight_std);
    get("seed", s.seed);
    get("act_rank", s.act_rank);
    get("act_noise", s.act_noise);
    get("act_outlier_channels", s.act_outlier_channels);
    get("act_outlier_scale", s.act_outlier_scale);
    get("n_calib", s.n_calib);
    get("n_heldout", s.n_heldout);
    if (j.contains("m_x") && !j.at("m_x").is_null()) s.m_x = j.at("m_x").get<double>();
    if (layers != nullptr) {
      *layers = 1;
      get("layers", *layers);
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("spec: ") + e.what());
  }
  s.validate();
  if (layers != nullptr && *layers == 0) throw InvalidArgument("spec: layers must be >= 1");
  return s;
}

json to_json(const bench::SynthLayerSpec& s) {
  return {{"d_out", s.d_out},
          {"d_in", s.d_in},
          {"outlier_channels", s.outlier_channels},
          {"outlier_scale", s.outlier_scale},
          {"weight_std", s.weight_std},
          {"seed", s.seed},
          {"act_rank", s.act_rank},
          {"act_noise", s.act_noise},
          {"act_outlier_channels", s.act_outlier_channels},
          {"act_outlier_scale", s.act_outlier_scale},
          {"n_calib", s.n_calib},
          {"n_heldout", s.n_heldout},
          {"m_x", std::isfinite(s.m_x) ? json(s.m_x) : json(nullptr)}};
}

void generate(const bench::SynthLayerSpec& spec, std::size_t layers, std::uint64_t seed,
              const fs::path& out_dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw IoError("cannot create output directory " + out_dir.string());

  json manifest = {{"schema", kSchema},
                   {"defaults", {{"method", "sarqc-gbs"}, {"scheme", scheme_json(quant::QuantScheme{})}}},
                   {"layers", json::array()}};
  const int width = layers > 100 ? 4 : 2;
  for (std::size_t i = 0; i < layers; ++i) {
    bench::SynthLayerSpec s = spec;
    s.seed = make_rng(seed, Stream::LayerWeights, i)();
    char id[32];
    std::snprintf(id, sizeof id, "layer%0*zu", width, i);
    const linalg::Matrix w = bench::gen_layer(s);
    const bench::ActivationModel model = bench::make_activation_model(s);
    auto rng = make_rng(s.seed, Stream::Calibration);
    const linalg::Matrix x = bench::sample_activations(model, s.n_calib, s.m_x, rng);
    const std::string wname = std::string(id) + ".weights.sqt";
    const std::string xname = std::string(id) + ".calib.sqt";
    io::write_matrix(out_dir / wname, w);
    io::write_matrix(out_dir / xname, x);
    manifest["layers"].push_back({{"layer_id", id},
                                  {"weights", wname},
                                  {"calib", xname},
                                  {"d_out", s.d_out},
                                  {"d_in", s.d_in},
                                  {"n", s.n_calib}});
  }
  write_text(out_dir / "manifest.json", dump(manifest));
}

}  // namespace sarqc::pipeline
