#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kondo/metrics.hpp"

namespace kondo {

struct SpeedupEntry {
  std::string method;
  bool reachable = false;
  std::int64_t step = -1;  // first logged step with seed-mean test error <= target
  double forward = 0.0;    // seed-mean counters at that step
  double backward = 0.0;
  std::vector<double> compute;  // F + c*B per cost ratio
  std::vector<double> speedup;  // reference compute / compute; NaN when either side is unreachable
};

struct SpeedupReport {
  double target = 0.0;
  std::vector<double> costs;
  std::string reference;
  std::vector<SpeedupEntry> entries;

  const SpeedupEntry* find(const std::string& method) const;
};

SpeedupReport compute_speedup(std::span<const MetricsRow> rows, double target, std::vector<double> costs,
                              const std::string& reference = "PG");
void write_speedup_csv(const std::filesystem::path& path, const SpeedupReport& report);

}  // namespace kondo
