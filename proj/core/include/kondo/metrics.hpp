#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace kondo {

/// One logged evaluation point. For reversal runs the error columns hold
/// 1 - reward.
struct MetricsRow {
  std::string method;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  std::uint64_t forward_samples = 0;
  std::uint64_t backward_samples = 0;
  double train_error = 0.0;
  double test_error = 0.0;
  double eff_gate_rate = 0.0;
  double lambda = 0.0;
  double wallclock = 0.0;
  std::uint64_t kept = 0;
  std::uint64_t skipped = 0;
};

/// Column names in file order.
const std::vector<std::string>& metrics_columns();

std::string format_double(double v);
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);
/// Every metrics_*.csv under `dir`, in path order.
std::vector<MetricsRow> read_run_metrics(const std::filesystem::path& dir);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;  // sample std / sqrt(n); 0 when n < 2
  std::size_t n = 0;
};
MeanSe mean_se(std::span<const double> xs);

struct SummaryRow {
  std::string method;
  std::int64_t step = 0;
  std::size_t seeds = 0;
  MeanSe forward, backward, train_error, test_error, eff_gate_rate;
};

/// Aggregates rows across seeds per (method, step). Methods keep their
/// first-appearance order.
std::vector<SummaryRow> summarize(std::span<const MetricsRow> rows);
void write_summary_csv(const std::filesystem::path& path, std::span<const SummaryRow> rows);

/// A numeric column of a row by name ("step", "forward_samples", ...).
double metric_value(const MetricsRow& row, const std::string& column);

}  // namespace kondo
