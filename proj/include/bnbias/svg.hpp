#pragma once

#include <string>
#include <vector>

namespace bnbias {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  int width = 800;
  int height = 500;
  /// Series count above which the legend is dropped.
  std::size_t max_legend = 10;
};

/// Standalone SVG line chart: frame, ticks, axis labels, one <polyline> per
/// series. Non-finite points (and x <= 0 on a log axis) are skipped.
std::string line_chart_svg(const std::vector<Series>& series, const ChartOptions& opts);

}  // namespace bnbias
