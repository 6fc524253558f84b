#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kondo/credit.hpp"
#include "kondo/learners.hpp"
#include "kondo/mnist_env.hpp"
#include "kondo/reversal_env.hpp"
#include "kondo/transformer_policy.hpp"

namespace kondo {

/// Invalid configuration; the message names the offending field.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& problem)
      : std::invalid_argument("config field '" + field + "': " + problem), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class ExperimentKind {
  kMnist,
  kReversal,
  kBanditGeometry,
  kBanditGambling,
  kSweepRate,
  kSweepLr,
  kSweepNoise,
  kSweepScaling,
};

std::string to_string(ExperimentKind kind);

struct MethodSpec {
  std::string label;
  AlgoConfig algo;
};

struct MnistSettings {
  bool synthetic = true;
  std::string images_path;
  std::string labels_path;
  std::string test_images_path;  // defaults to images_path with "train" replaced by "t10k"
  std::string test_labels_path;
  SyntheticMnistSpec synthetic_spec;
  std::size_t eval_size = 0;  // 0 = whole test split
};

struct GateDumpSpec {
  std::int64_t start = 0;  // first step dumped
  std::int64_t count = 0;  // consecutive steps dumped; 0 disables
};

struct SweepSpec {
  std::string key;  // dotted config path
  std::vector<nlohmann::json> values;
  std::string base = "mnist";  // experiment kind of each grid point (rate/lr/noise sweeps)
};

struct RunConfig {
  ExperimentKind kind = ExperimentKind::kMnist;
  std::vector<MethodSpec> methods;
  NoiseSpec noise;
  BaselineSpec baseline;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::int64_t steps = 3000;
  std::int64_t eval_interval = 100;
  std::string output_dir = "runs/default";
  std::size_t workers = 1;
  bool record_wallclock = false;
  bool debug_checks = false;
  double cost_ratio = 1.0;
  MlpConfig mlp;
  MnistSettings mnist;
  ReversalSpec reversal;
  TransformerConfig transformer;
  std::size_t eval_prompts = 100;  // greedy-evaluation prompts for reversal
  GateDumpSpec gate_dump;
  SweepSpec sweep;
};

/// Parses and validates a configuration document. Unknown keys are errors.
RunConfig parse_config(const nlohmann::json& doc);
/// Fully populated document; parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const RunConfig& config);

/// Applies "a.b.c=value" to the document. The value is parsed as JSON when
/// possible and taken as a string otherwise. Array elements are addressed by
/// index ("methods.1.lr").
void apply_override(nlohmann::json& doc, const std::string& assignment);
void set_path(nlohmann::json& doc, const std::string& dotted, const nlohmann::json& value);

nlohmann::json load_json(const std::filesystem::path& path);

}  // namespace kondo
