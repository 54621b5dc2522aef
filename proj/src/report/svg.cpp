#include "osc/report/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "osc/errors.hpp"

namespace osc::report {

namespace {

constexpr const char* kPalette[] = {"#1f4e9c", "#d9534f", "#3c9d5d", "#8e5cb5", "#e08a1e", "#4aa3b5"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string blue_shade(double v) {
  v = std::clamp(v, 0.0, 1.0);
  // white (255,255,255) to deep blue (8,48,107)
  const int r = static_cast<int>(std::lround(255 + (8 - 255) * v));
  const int g = static_cast<int>(std::lround(255 + (48 - 255) * v));
  const int b = static_cast<int>(std::lround(255 + (107 - 255) * v));
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

struct Range {
  double lo = 0.0, hi = 1.0;
};

Range padded(double lo, double hi) {
  if (!(hi > lo)) {
    const double pad = std::abs(lo) > 0 ? std::abs(lo) * 0.1 : 1.0;
    return {lo - pad, hi + pad};
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string svg_heatmap(const std::string& title, const std::vector<std::vector<double>>& values) {
  require(!values.empty() && !values.front().empty(), "heatmap needs at least one cell");
  const int cell = 40, top = 40, left = 10;
  const int rows = static_cast<int>(values.size());
  const int cols = static_cast<int>(values.front().size());
  const int width = left * 2 + cols * cell, height = top + rows * cell + 10;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  s << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << xml_escape(title)
    << "</text>\n";
  for (int r = 0; r < rows; ++r) {
    require(static_cast<int>(values[r].size()) == cols, "heatmap rows must have equal length");
    for (int c = 0; c < cols; ++c) {
      const double v = values[r][c];
      const std::string fill = std::isnan(v) ? "#9e9e9e" : blue_shade(v);
      const int x = left + c * cell, y = top + r * cell;
      s << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
        << fill << "\" stroke=\"#444\" stroke-width=\"0.5\"/>\n";
      if (!std::isnan(v)) {
        s << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4
          << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\" fill=\""
          << (v > 0.55 ? "#fff" : "#000") << "\">" << num(v) << "</text>\n";
      }
    }
  }
  s << "</svg>\n";
  return s.str();
}

std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series) {
  require(!series.empty(), "line plot needs at least one series");
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const Series& se : series) {
    require(se.x.size() == se.y.size() && !se.x.empty(), "series needs matching nonempty x and y");
    for (double v : se.x) xlo = std::min(xlo, v), xhi = std::max(xhi, v);
    for (double v : se.y) ylo = std::min(ylo, v), yhi = std::max(yhi, v);
  }
  const Range xr = padded(xlo, xhi), yr = padded(ylo, yhi);
  const double w = 560, h = 360, left = 70, top = 40, pw = w - left - 150, ph = h - top - 50;
  auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return top + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  s << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << xml_escape(title)
    << "</text>\n";
  s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xr.lo + (xr.hi - xr.lo) * i / 4, yv = yr.lo + (yr.hi - yr.lo) * i / 4;
    s << "<text x=\"" << px(xv) << "\" y=\"" << top + ph + 16
      << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
    s << "<text x=\"" << left - 6 << "\" y=\"" << py(yv) + 3
      << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << num(yv) << "</text>\n";
  }
  s << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 10
    << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" << xml_escape(x_label) << "</text>\n";
  s << "<text x=\"14\" y=\"" << top + ph / 2 << "\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 "
    << top + ph / 2 << ")\" text-anchor=\"middle\">" << xml_escape(y_label) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& se = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < se.x.size(); ++i) s << px(se.x[i]) << "," << py(se.y[i]) << " ";
    s << "\"/>\n";
    for (std::size_t i = 0; i < se.x.size(); ++i) {
      s << "<circle cx=\"" << px(se.x[i]) << "\" cy=\"" << py(se.y[i]) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    s << "<text x=\"" << left + pw + 10 << "\" y=\"" << top + 14 + 16 * k << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\""
      << color << "\">" << xml_escape(se.name) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string svg_bar_chart(const std::string& title, const std::string& y_label,
                          const std::vector<std::pair<std::string, double>>& bars) {
  require(!bars.empty(), "bar chart needs at least one bar");
  double lo = 0.0, hi = 0.0;
  for (const auto& [name, v] : bars) lo = std::min(lo, v), hi = std::max(hi, v);
  const Range r = padded(lo, hi);
  const double slot = 90, left = 70, top = 40, ph = 260;
  const double w = left + slot * bars.size() + 20, h = top + ph + 60;
  auto py = [&](double y) { return top + ph - (y - r.lo) / (r.hi - r.lo) * ph; };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  s << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << xml_escape(title)
    << "</text>\n";
  s << "<line x1=\"" << left << "\" x2=\"" << w - 10 << "\" y1=\"" << py(0) << "\" y2=\"" << py(0)
    << "\" stroke=\"#444\"/>\n";
  s << "<text x=\"14\" y=\"" << top + ph / 2 << "\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 "
    << top + ph / 2 << ")\" text-anchor=\"middle\">" << xml_escape(y_label) << "</text>\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& [name, v] = bars[i];
    const double x = left + slot * i + 15;
    const double y0 = py(std::max(v, 0.0)), y1 = py(std::min(v, 0.0));
    s << "<rect x=\"" << x << "\" y=\"" << y0 << "\" width=\"" << slot - 30 << "\" height=\"" << y1 - y0
      << "\" fill=\"" << kPalette[i % std::size(kPalette)] << "\"/>\n";
    s << "<text x=\"" << x + (slot - 30) / 2 << "\" y=\"" << y0 - 4
      << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">" << num(v) << "</text>\n";
    s << "<text x=\"" << x + (slot - 30) / 2 << "\" y=\"" << top + ph + 20
      << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">" << xml_escape(name) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace osc::report
