#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kondo/config.hpp"
#include "kondo/metrics.hpp"
#include "kondo/mnist_env.hpp"

namespace kondo {

/// pi(y*) of one sample at a dumped step, with its gate outcome.
struct GateDumpRow {
  std::string method;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  bool kept = false;
  double pi_star = 0.0;
};

/// Everything one (method, seed) training run produced.
struct RunTrace {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<MetricsRow> rows;
  std::vector<double> step_reward;  // mean training reward of each step's batch
  std::vector<std::uint64_t> step_forward;   // cumulative, after each step
  std::vector<std::uint64_t> step_backward;
  std::vector<GateDumpRow> gate_rows;
  std::uint64_t final_forward = 0;
  std::uint64_t final_backward = 0;
};

/// Loads IDX files or builds (and caches) the synthetic dataset.
std::shared_ptr<const MnistDataset> load_mnist(const MnistSettings& settings);

RunTrace train_mnist(const RunConfig& config, const MethodSpec& method, std::uint64_t seed,
                     const MnistDataset& data);
RunTrace train_reversal(const RunConfig& config, const MethodSpec& method, std::uint64_t seed);

/// Runs jobs [0, n) on `workers` threads. Results land in job order, so
/// the outcome does not depend on the worker count.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job);

/// Trains every (method, seed) pair of an mnist or reversal config.
std::vector<RunTrace> run_training(const RunConfig& config);

/// Writes config.json, metrics_<method>_<seed>.csv, gate_<method>_<seed>.csv
/// (when dumping), summary.csv and charts/ under `dir`.
void write_run_outputs(const std::filesystem::path& dir, const RunConfig& config, std::span<const RunTrace> traces);
void write_gate_csv(const std::filesystem::path& path, std::span<const GateDumpRow> rows);

/// run(): dispatches on the experiment kind and writes outputs under
/// config.output_dir. Sweeps write one sub-directory per grid value.
void run(const RunConfig& config, const nlohmann::json& document);

}  // namespace kondo
