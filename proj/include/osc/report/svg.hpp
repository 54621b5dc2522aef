#pragma once

#include <string>
#include <utility>
#include <vector>

namespace osc::report {

/// Grid of values in [0, 1] drawn white (0) to deep blue (1), row 0 at the
/// top. NaN cells are drawn gray.
std::string svg_heatmap(const std::string& title, const std::vector<std::vector<double>>& values);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series);

/// Bars in the given order.
std::string svg_bar_chart(const std::string& title, const std::string& y_label,
                          const std::vector<std::pair<std::string, double>>& bars);

/// Escapes &, <, > and quotes for use in SVG text.
std::string xml_escape(const std::string& text);

}  // namespace osc::report
