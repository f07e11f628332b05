#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "sarqc/bench.hpp"
#include "sarqc/linalg.hpp"
#include "sarqc/objective.hpp"
#include "sarqc/quantizer.hpp"

namespace sarqc::pipeline {

inline constexpr int kSchema = 1;
inline constexpr const char* kVersion = "0.1.0";

enum class QuantMethod { Rtn, Awq, Gptq, SarqcGs, SarqcGbs };
std::string to_string(QuantMethod m);
QuantMethod parse_quant_method(const std::string& s);

struct LayerEntry {
  std::string layer_id;
  std::filesystem::path weights;  // resolved against the manifest directory
  std::filesystem::path calib;
  std::size_t d_out = 0;
  std::size_t d_in = 0;
  std::size_t n = 0;
};

struct Manifest {
  std::filesystem::path path;
  std::vector<LayerEntry> layers;
  nlohmann::json defaults = nlohmann::json::object();
};

// Parses and validates: unique, filename-safe ids; files present; header
// dims match the declared shapes. Nothing is loaded beyond the headers.
Manifest load_manifest(const std::filesystem::path& path);
bool valid_layer_id(const std::string& id);

struct RunConfig {
  QuantMethod method = QuantMethod::SarqcGbs;
  quant::QuantScheme scheme;
  std::optional<double> lambda;  // fixed λ; otherwise the grid is searched
  std::vector<double> lambda_grid;
  std::vector<double> gamma_grid;
  std::vector<double> alpha_grid;
  bool identity_saliency = false;
  std::size_t block_size = 128;
  std::uint64_t seed = 0;
  double val_fraction = 0.25;

  // Fills empty grids with the method's defaults.
  void resolve_defaults();
  void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
RunConfig config_from_json(const nlohmann::json& j);
// Applies a manifest "defaults" block ({scheme, method, grids}) onto c.
void apply_defaults(RunConfig& c, const nlohmann::json& defaults);

struct LayerResult {
  std::string layer_id;
  std::string method;
  std::optional<double> lambda;
  std::optional<double> gamma;
  std::optional<double> alpha;
  objective::LossBreakdown losses;  // on the training split
  double heldout_risk = 0.0;        // on the validation split
  double jitter_used = 0.0;
  double wall_time_ms = 0.0;
  quant::QuantizedLayer layer;
};

// Quantizes one layer with inputs X (d_in × n): the last val_fraction of
// the columns is held out for heldout_risk and λ selection.
LayerResult quantize_layer(const std::string& layer_id, const linalg::Matrix& w,
                           const linalg::Matrix& x, const RunConfig& config);

// Raised for a numerical failure inside one layer.
struct LayerFailure : std::runtime_error {
  std::string layer_id;
  LayerFailure(std::string id, const std::string& what)
      : std::runtime_error(what), layer_id(std::move(id)) {}
};

// Quantizes every manifest layer on up to `jobs` threads, writes
//   <id>.codes.sqt <id>.scales.sqt <id>.zeros.sqt <id>.dequant.sqt
//   [<id>.channel_scale.sqt] report.json timing.json
// into out_dir and returns the report. Outputs do not depend on `jobs`.
nlohmann::json run_quantize(const Manifest& manifest, const RunConfig& config,
                            const std::filesystem::path& out_dir, std::size_t jobs);

nlohmann::json layer_report(const LayerResult& r);

// Synthetic layer spec <-> JSON. The "layers" key sets the layer count for gen.
bench::SynthLayerSpec spec_from_json(const nlohmann::json& j, std::size_t* layers = nullptr);
nlohmann::json to_json(const bench::SynthLayerSpec& s);

// Writes <prefix>NN.weights.sqt / .calib.sqt and manifest.json; layer i
// takes its own seed derived from `seed`.
void generate(const bench::SynthLayerSpec& spec, std::size_t layers, std::uint64_t seed,
              const std::filesystem::path& out_dir);

std::string dump(const nlohmann::json& j);  // stable pretty-print with trailing newline

}  // namespace sarqc::pipeline
