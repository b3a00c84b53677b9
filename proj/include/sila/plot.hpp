#pragma once

#include <span>
#include <string>
#include <vector>

namespace sila {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Self-contained SVG line chart with axes, min/max tick labels and a legend.
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           std::span<const Series> series);

}  // namespace sila
