#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kondo/chart.hpp"
#include "kondo/config.hpp"
#include "kondo/metrics.hpp"
#include "kondo/proofs.hpp"
#include "kondo/runner.hpp"
#include "kondo/speedup.hpp"

namespace {

kondo::RunConfig resolve(const std::string& path, const std::vector<std::string>& overrides, nlohmann::json& doc) {
  doc = kondo::load_json(path);
  for (const auto& o : overrides) kondo::apply_override(doc, o);
  return kondo::parse_config(doc);
}

bool is_sweep(kondo::ExperimentKind k) {
  using K = kondo::ExperimentKind;
  return k == K::kSweepRate || k == K::kSweepLr || k == K::kSweepNoise || k == K::kSweepScaling;
}

int cmd_run(const std::string& path, const std::vector<std::string>& overrides, bool want_sweep) {
  nlohmann::json doc;
  const auto config = resolve(path, overrides, doc);
  if (want_sweep && !is_sweep(config.kind)) {
    std::cerr << "kondo sweep: config kind '" << kondo::to_string(config.kind) << "' is not a sweep\n";
    return 2;
  }
  kondo::run(config, doc);
  std::cout << "wrote " << config.output_dir << '\n';
  return 0;
}

int cmd_prove(const std::vector<std::string>& names, const std::string& out) {
  bool all = true;
  for (const auto& name : names) {
    const auto r = kondo::prove(name, out);
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << '\n';
    for (const auto& line : r.lines) std::cout << "  " << line << '\n';
    all = all && r.pass;
  }
  return all ? 0 : 1;
}

int cmd_speedup(const std::string& dir, double target, const std::vector<double>& costs,
                const std::string& reference, const std::string& out) {
  const auto rows = kondo::read_run_metrics(dir);
  const auto report = kondo::compute_speedup(rows, target, costs, reference);
  const std::filesystem::path path = out.empty() ? std::filesystem::path(dir) / "speedup.csv" : std::filesystem::path(out);
  kondo::write_speedup_csv(path, report);
  std::cout << "target test error " << target << ", reference " << reference << '\n';
  for (const auto& e : report.entries) {
    std::cout << "  " << e.method << ':';
    if (!e.reachable) {
      std::cout << " unreachable\n";
      continue;
    }
    for (std::size_t k = 0; k < costs.size(); ++k) {
      std::cout << "  c=" << costs[k] << " -> ";
      if (std::isnan(e.speedup[k])) std::cout << "n/a";
      else std::cout << e.speedup[k] << 'x';
    }
    std::cout << '\n';
  }
  std::cout << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_chart(const std::vector<std::string>& dirs, const std::string& x, const std::string& y, bool log_x,
              bool log_y, const std::string& title, const std::string& out) {
  std::vector<kondo::MetricsRow> rows;
  for (const auto& d : dirs) {
    auto part = std::filesystem::is_directory(d) ? kondo::read_run_metrics(d) : kondo::read_metrics_csv(d);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const auto series = kondo::series_from_metrics(rows, x, y);
  const kondo::ChartSpec spec{.title = title.empty() ? y + " vs " + x : title,
                              .x_label = x,
                              .y_label = y,
                              .log_x = log_x,
                              .log_y = log_y};
  const auto svg = kondo::render_svg(series, spec);
  if (const auto parent = std::filesystem::path(out).parent_path(); !parent.empty())
    std::filesystem::create_directories(parent);
  std::ofstream(out, std::ios::binary) << svg;
  std::cout << "wrote " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delight-gated policy-gradient laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "Train the methods of a config and write a run directory");
  run->add_option("config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  run->add_option("--set", overrides, "Override a leaf field: dotted.key=value")->take_all();

  auto* sweep = app.add_subcommand("sweep", "Run a sweep config (rate, lr, noise or scaling)");
  sweep->add_option("config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  sweep->add_option("--set", overrides, "Override a leaf field: dotted.key=value")->take_all();

  std::vector<std::string> props;
  std::string prove_out = "proofs";
  auto* prove = app.add_subcommand("prove", "Exact checks of the tabular results");
  prove->add_option("name", props, "gate | lemma1 | prop1 | prop2 | prop3")
      ->required()
      ->check(CLI::IsMember({"gate", "lemma1", "prop1", "prop2", "prop3"}));
  prove->add_option("--out", prove_out, "Directory for the CSV reports");

  std::string run_dir, speedup_out, reference = "PG";
  double target = 0.05;
  std::vector<double> costs = {0, 1, 2, 4};
  auto* speed = app.add_subcommand("speedup", "Compute speedup vs a reference method");
  speed->add_option("run_dir", run_dir, "Run directory with metrics_*.csv")->required()->check(CLI::ExistingDirectory);
  speed->add_option("--target", target, "Target test error");
  speed->add_option("--costs", costs, "Cost ratios c")->delimiter(',');
  speed->add_option("--reference", reference, "Reference method label");
  speed->add_option("--out", speedup_out, "Output CSV (default <run_dir>/speedup.csv)");

  std::vector<std::string> chart_inputs;
  std::string x = "forward_samples", y = "test_error", title, chart_out = "chart.svg";
  bool log_x = false, log_y = false;
  auto* chart = app.add_subcommand("chart", "SVG line chart from metrics CSVs");
  chart->add_option("inputs", chart_inputs, "Run directories or metrics CSVs")->required();
  chart->add_option("--x", x, "x column");
  chart->add_option("--y", y, "y column");
  chart->add_flag("--logx", log_x, "Log-scale x axis");
  chart->add_flag("--logy", log_y, "Log-scale y axis");
  chart->add_option("--title", title, "Chart title");
  chart->add_option("--out", chart_out, "Output SVG path");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config_path, overrides, false);
    if (*sweep) return cmd_run(config_path, overrides, true);
    if (*prove) return cmd_prove(props, prove_out);
    if (*speed) return cmd_speedup(run_dir, target, costs, reference, speedup_out);
    if (*chart) return cmd_chart(chart_inputs, x, y, log_x, log_y, title, chart_out);
  } catch (const std::exception& e) {
    std::cerr << "kondo: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
