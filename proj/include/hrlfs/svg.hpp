#pragma once

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "hrlfs/engine.hpp"

namespace hrlfs {

namespace detail {

inline std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// One line-chart panel; series share the x axis (step index).
inline void svg_panel(std::ostringstream& o, double top, const std::string& title,
                      const std::vector<std::pair<std::string, std::vector<double>>>& series,
                      const std::vector<std::string>& colors) {
  constexpr double left = 60, width = 720, height = 200;
  double lo = 0.0, hi = 1.0;
  std::size_t n = 0;
  for (const auto& [name, ys] : series) {
    n = std::max(n, ys.size());
    for (double y : ys) {
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const auto x_of = [&](std::size_t i) { return left + (n > 1 ? width * i / static_cast<double>(n - 1) : 0.0); };
  const auto y_of = [&](double y) { return top + height - height * (y - lo) / (hi - lo); };

  o << "<text x=\"" << left << "\" y=\"" << top - 8 << "\" font-size=\"14\">" << title << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << width << "\" height=\"" << height
    << "\" fill=\"none\" stroke=\"#999\"/>\n";
  o << "<text x=\"" << left - 6 << "\" y=\"" << top + 10 << "\" font-size=\"10\" text-anchor=\"end\">" << fmt_num(hi)
    << "</text>\n";
  o << "<text x=\"" << left - 6 << "\" y=\"" << top + height << "\" font-size=\"10\" text-anchor=\"end\">"
    << fmt_num(lo) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ys = series[s].second;
    o << "<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"" << colors[s % colors.size()] << "\" points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i) o << fmt_num(x_of(i)) << ',' << fmt_num(y_of(ys[i])) << ' ';
    o << "\"/>\n";
    o << "<text x=\"" << left + width - 120 << "\" y=\"" << top + 14 + 14 * static_cast<double>(s)
      << "\" font-size=\"11\" fill=\"" << colors[s % colors.size()] << "\">" << series[s].first << "</text>\n";
  }
}

}  // namespace detail

// Standalone SVG with the reward curves and the activated-agent count per step.
inline std::string render_run_svg(const RunReport& r) {
  std::vector<double> perf, quantity, total, active;
  for (const auto& s : r.steps) {
    perf.push_back(s.r_perf);
    quantity.push_back(s.r_quantity);
    total.push_back(s.r_total);
    active.push_back(static_cast<double>(s.activated.size()));
  }
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"820\" height=\"560\" font-family=\"sans-serif\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  detail::svg_panel(o, 40, "Rewards per step", {{"r_total", total}, {"r_perf", perf}, {"r_quantity", quantity}},
                    {"#1f77b4", "#2ca02c", "#ff7f0e"});
  detail::svg_panel(o, 320, "Activated agents per step", {{"activated", active}}, {"#d62728"});
  o << "</svg>\n";
  return o.str();
}

}  // namespace hrlfs
