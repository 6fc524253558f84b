#include "kondo/speedup.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace kondo {

const SpeedupEntry* SpeedupReport::find(const std::string& method) const {
  for (const auto& e : entries)
    if (e.method == method) return &e;
  return nullptr;
}

SpeedupReport compute_speedup(std::span<const MetricsRow> rows, double target, std::vector<double> costs,
                              const std::string& reference) {
  SpeedupReport report;
  report.target = target;
  report.costs = std::move(costs);
  report.reference = reference;
  for (const auto& s : summarize(rows)) {
    SpeedupEntry* e = nullptr;
    for (auto& existing : report.entries)
      if (existing.method == s.method) e = &existing;
    if (!e) {
      report.entries.push_back({.method = s.method});
      e = &report.entries.back();
    }
    if (e->reachable || s.test_error.mean > target) continue;
    e->reachable = true;
    e->step = s.step;
    e->forward = s.forward.mean;
    e->backward = s.backward.mean;
  }
  const SpeedupEntry* ref = report.find(reference);
  if (!ref) throw std::invalid_argument("speedup: reference method '" + reference + "' not in the metrics");
  const auto nan = std::numeric_limits<double>::quiet_NaN();
  for (auto& e : report.entries) {
    for (double c : report.costs) e.compute.push_back(e.reachable ? e.forward + c * e.backward : nan);
  }
  ref = report.find(reference);
  for (auto& e : report.entries) {
    for (std::size_t k = 0; k < report.costs.size(); ++k)
      e.speedup.push_back(e.reachable && ref->reachable ? ref->compute[k] / e.compute[k] : nan);
  }
  return report;
}

void write_speedup_csv(const std::filesystem::path& path, const SpeedupReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "method,target,cost_ratio,reachable,step,forward,backward,compute,speedup\n";
  for (const auto& e : report.entries) {
    for (std::size_t k = 0; k < report.costs.size(); ++k) {
      out << e.method << ',' << format_double(report.target) << ',' << format_double(report.costs[k]) << ','
          << (e.reachable ? "yes" : "unreachable") << ',' << e.step << ',' << format_double(e.forward) << ','
          << format_double(e.backward) << ',' << format_double(e.compute[k]) << ','
          << format_double(e.speedup[k]) << '\n';
    }
  }
}

}  // namespace kondo
