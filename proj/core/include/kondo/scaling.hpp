#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kondo/config.hpp"
#include "kondo/runner.hpp"

namespace kondo {

inline constexpr double kSolvedReward = 0.75;
inline bool is_solved(double mean_reward) { return mean_reward > kSolvedReward; }

struct ScalingPoint {
  double value = 0.0;
  bool solved = false;           // full-run mean reward > 0.75 (decides M*/H*)
  bool solved_trailing = false;  // final-10% mean reward > 0.75
  double mean_reward = 0.0;
  double trailing_reward = 0.0;
  double average_error = 0.0;    // 1 - full-run mean reward
  double final_error = 0.0;      // 1 - final-10% mean reward
  std::uint64_t forward_total = 0;
  std::uint64_t backward_total = 0;
  // First step whose running mean reward exceeds 0.75, with the compute
  // spent up to it; -1 when never.
  std::int64_t solve_step = -1;
  std::uint64_t solve_forward = 0;
  std::uint64_t solve_backward = 0;
};

struct ScalingResult {
  std::string axis;  // "vocab" or "length"
  std::string method;
  std::vector<ScalingPoint> points;
  double star = 0.0;  // largest solved grid value, 0 when none
};

/// Seed-averaged scaling point from the traces of one grid value.
ScalingPoint scaling_point(double value, std::span<const RunTrace> seeds);

/// Largest grid value solved within a forward (or backward) budget. Never
/// increases as the budget shrinks.
double star_within_budget(const ScalingResult& result, std::uint64_t budget, bool backward);

/// Trains every (method, grid value, seed) with the axis key set to the grid
/// value. `document` is the raw configuration the grid values are applied to.
std::vector<ScalingResult> scaling_sweep(const RunConfig& config, const nlohmann::json& document);

void write_scaling_csv(const std::filesystem::path& path, std::span<const ScalingResult> results);

}  // namespace kondo
