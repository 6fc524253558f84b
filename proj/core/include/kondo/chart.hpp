#pragma once

#include <span>
#include <string>
#include <vector>

#include "kondo/metrics.hpp"

namespace kondo {

struct ChartSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  int width = 720;
  int height = 440;
};

/// Self-contained SVG line chart, one polyline per series. On log axes
/// non-positive points are dropped. Output is byte-stable for fixed input.
/// Throws std::invalid_argument when no series has a plottable point.
std::string render_svg(std::span<const ChartSeries> series, const ChartSpec& spec);

/// Per-method seed-mean of `y_column` against seed-mean of `x_column`.
std::vector<ChartSeries> series_from_metrics(std::span<const MetricsRow> rows, const std::string& x_column,
                                             const std::string& y_column);

}  // namespace kondo
