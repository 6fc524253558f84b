#include "kondo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kondo {

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {
      "method", "seed",          "step",   "forward_samples", "backward_samples", "train_error", "test_error",
      "eff_gate_rate", "lambda", "wallclock", "kept", "skipped"};
  return cols;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

double parse_double(const std::string& s) {
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  if (s == "nan") return NAN;
  return std::stod(s);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto& cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : rows) {
    out << r.method << ',' << r.seed << ',' << r.step << ',' << r.forward_samples << ',' << r.backward_samples << ','
        << format_double(r.train_error) << ',' << format_double(r.test_error) << ','
        << format_double(r.eff_gate_rate) << ',' << format_double(r.lambda) << ',' << format_double(r.wallclock)
        << ',' << r.kept << ',' << r.skipped << '\n';
  }
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty metrics file");
  if (split(line) != metrics_columns()) throw std::runtime_error(path.string() + ": unexpected metrics header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != metrics_columns().size()) throw std::runtime_error(path.string() + ": malformed row");
    MetricsRow r;
    r.method = c[0];
    r.seed = std::stoull(c[1]);
    r.step = std::stoll(c[2]);
    r.forward_samples = std::stoull(c[3]);
    r.backward_samples = std::stoull(c[4]);
    r.train_error = parse_double(c[5]);
    r.test_error = parse_double(c[6]);
    r.eff_gate_rate = parse_double(c[7]);
    r.lambda = parse_double(c[8]);
    r.wallclock = parse_double(c[9]);
    r.kept = std::stoull(c[10]);
    r.skipped = std::stoull(c[11]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<MetricsRow> read_run_metrics(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("metrics_") && name.ends_with(".csv"))
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<MetricsRow> rows;
  for (const auto& f : files) {
    auto part = read_metrics_csv(f);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

MeanSe mean_se(std::span<const double> xs) {
  MeanSe r;
  r.n = xs.size();
  if (xs.empty()) return r;
  for (double x : xs) r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return r;
  double ss = 0.0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  const double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  r.se = sd / std::sqrt(static_cast<double>(xs.size()));
  return r;
}

std::vector<SummaryRow> summarize(std::span<const MetricsRow> rows) {
  std::vector<std::string> order;
  std::map<std::pair<std::string, std::int64_t>, std::vector<const MetricsRow*>> groups;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.method) == order.end()) order.push_back(r.method);
    groups[{r.method, r.step}].push_back(&r);
  }
  std::vector<SummaryRow> out;
  for (const auto& m : order) {
    for (const auto& [key, members] : groups) {
      if (key.first != m) continue;
      SummaryRow s;
      s.method = m;
      s.step = key.second;
      s.seeds = members.size();
      auto collect = [&](auto field) {
        std::vector<double> v;
        for (const auto* r : members) v.push_back(static_cast<double>(field(*r)));
        return mean_se(v);
      };
      s.forward = collect([](const MetricsRow& r) { return r.forward_samples; });
      s.backward = collect([](const MetricsRow& r) { return r.backward_samples; });
      s.train_error = collect([](const MetricsRow& r) { return r.train_error; });
      s.test_error = collect([](const MetricsRow& r) { return r.test_error; });
      s.eff_gate_rate = collect([](const MetricsRow& r) { return r.eff_gate_rate; });
      out.push_back(std::move(s));
    }
  }
  return out;
}

void write_summary_csv(const std::filesystem::path& path, std::span<const SummaryRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "method,step,seeds,forward_mean,backward_mean,train_error_mean,train_error_se,test_error_mean,"
         "test_error_se,eff_gate_rate_mean\n";
  for (const auto& s : rows) {
    out << s.method << ',' << s.step << ',' << s.seeds << ',' << format_double(s.forward.mean) << ','
        << format_double(s.backward.mean) << ',' << format_double(s.train_error.mean) << ','
        << format_double(s.train_error.se) << ',' << format_double(s.test_error.mean) << ','
        << format_double(s.test_error.se) << ',' << format_double(s.eff_gate_rate.mean) << '\n';
  }
}

double metric_value(const MetricsRow& row, const std::string& column) {
  if (column == "seed") return static_cast<double>(row.seed);
  if (column == "step") return static_cast<double>(row.step);
  if (column == "forward_samples") return static_cast<double>(row.forward_samples);
  if (column == "backward_samples") return static_cast<double>(row.backward_samples);
  if (column == "train_error") return row.train_error;
  if (column == "test_error") return row.test_error;
  if (column == "eff_gate_rate") return row.eff_gate_rate;
  if (column == "lambda") return row.lambda;
  if (column == "wallclock") return row.wallclock;
  if (column == "kept") return static_cast<double>(row.kept);
  if (column == "skipped") return static_cast<double>(row.skipped);
  throw std::invalid_argument("unknown metrics column '" + column + "'");
}

}  // namespace kondo
