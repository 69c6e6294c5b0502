#pragma once

#include <string>
#include <vector>

namespace epiforge {

struct ChartSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool dashed = false;
};

struct ChartLabels {
  std::string title;
  std::string x_axis;
  std::string y_axis;
  /// Optional tick labels for the x axis, placed at `x_ticks`.
  std::vector<double> x_ticks;
  std::vector<std::string> x_tick_labels;
};

/// Static SVG line chart; series with fewer than two points are drawn as dots
/// and unnamed series stay out of the legend.
std::string line_chart_svg(const ChartLabels& labels, const std::vector<ChartSeries>& series, int width = 900,
                           int height = 420);

}  // namespace epiforge
