#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "tsdiag/errors.hpp"

namespace tsdiag {

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct SvgCanvas {
  static constexpr double width = 800.0;
  static constexpr double height = 400.0;
  static constexpr double margin = 45.0;

  double x0, x1, y0, y1;  // data ranges

  double x(double v) const {
    return margin + (v - x0) / (x1 - x0) * (width - 2 * margin);
  }
  double y(double v) const {
    return height - margin - (v - y0) / (y1 - y0) * (height - 2 * margin);
  }
};

inline void svg_open(std::ostream& out) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
      << SvgCanvas::width << "\" height=\"" << SvgCanvas::height
      << "\" viewBox=\"0 0 " << SvgCanvas::width << " " << SvgCanvas::height
      << "\">\n";
}

inline void svg_line(std::ostream& out, const std::string& cls, double xa,
                     double ya, double xb, double yb,
                     const std::string& stroke, const std::string& dash = "") {
  out << "  <line class=\"" << cls << "\" x1=\"" << svg_num(xa) << "\" y1=\""
      << svg_num(ya) << "\" x2=\"" << svg_num(xb) << "\" y2=\"" << svg_num(yb)
      << "\" stroke=\"" << stroke << "\"";
  if (!dash.empty()) out << " stroke-dasharray=\"" << dash << "\"";
  out << "/>\n";
}

inline void svg_tick_label(std::ostream& out, double x, double y,
                           const std::string& text,
                           const std::string& anchor) {
  out << "  <text x=\"" << svg_num(x) << "\" y=\"" << svg_num(y)
      << "\" font-size=\"11\" font-family=\"sans-serif\" text-anchor=\""
      << anchor << "\">" << text << "</text>\n";
}

}  // namespace detail

/// Correlogram: one bar per lag rooted at zero, dashed significance bounds at
/// ±bound, solid zero axis. Structure is stable: exactly lags.size() rects
/// with class "bar" and two lines with class "bound".
inline void write_correlogram_svg(const std::string& path,
                                  const std::vector<int>& lags,
                                  const std::vector<double>& correlations,
                                  double bound) {
  if (lags.empty() || lags.size() != correlations.size())
    throw InvalidArgument("write_correlogram_svg: bad inputs");
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open file for writing");

  double peak = bound;
  for (double c : correlations) peak = std::max(peak, std::abs(c));
  detail::SvgCanvas canvas{lags.front() - 0.5, lags.back() + 0.5,
                           -1.05 * peak, 1.05 * peak};

  detail::svg_open(out);
  detail::svg_line(out, "axis", canvas.x(canvas.x0), canvas.y(0.0),
                   canvas.x(canvas.x1), canvas.y(0.0), "black");
  detail::svg_line(out, "bound", canvas.x(canvas.x0), canvas.y(bound),
                   canvas.x(canvas.x1), canvas.y(bound), "blue", "6 4");
  detail::svg_line(out, "bound", canvas.x(canvas.x0), canvas.y(-bound),
                   canvas.x(canvas.x1), canvas.y(-bound), "blue", "6 4");

  const double slot = (canvas.width - 2 * canvas.margin) /
                      static_cast<double>(lags.size());
  const double bar = std::max(1.0, 0.6 * slot);
  for (std::size_t i = 0; i < lags.size(); ++i) {
    const double cx = canvas.x(static_cast<double>(lags[i]));
    const double ya = canvas.y(0.0);
    const double yb = canvas.y(correlations[i]);
    out << "  <rect class=\"bar\" x=\"" << detail::svg_num(cx - bar / 2)
        << "\" y=\"" << detail::svg_num(std::min(ya, yb)) << "\" width=\""
        << detail::svg_num(bar) << "\" height=\""
        << detail::svg_num(std::max(0.5, std::abs(ya - yb))) << "\"/>\n";
  }

  const int step = std::max(1, (lags.back() - lags.front()) / 8);
  for (int lag = lags.front(); lag <= lags.back(); lag += step)
    detail::svg_tick_label(out, canvas.x(lag), canvas.height - 18,
                           std::to_string(lag), "middle");
  detail::svg_tick_label(out, canvas.margin - 6, canvas.y(bound) + 4,
                         detail::svg_num(bound), "end");
  detail::svg_tick_label(out, canvas.margin - 6, canvas.y(-bound) + 4,
                         detail::svg_num(-bound), "end");
  out << "</svg>\n";
}

/// Time plot: a single polyline with class "series" over the year axis;
/// missing values are skipped, the line continues across the gap.
inline void write_series_svg(const std::string& path, int start_time,
                             const std::vector<double>& values) {
  if (values.empty()) throw InvalidArgument("write_series_svg: empty series");
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open file for writing");

  double lo = 0.0, hi = 0.0;
  bool seen = false;
  for (double v : values) {
    if (is_missing(v)) continue;
    lo = seen ? std::min(lo, v) : v;
    hi = seen ? std::max(hi, v) : v;
    seen = true;
  }
  if (!seen) throw InvalidArgument("write_series_svg: all values missing");
  const double pad = hi > lo ? 0.05 * (hi - lo) : 1.0;
  detail::SvgCanvas canvas{static_cast<double>(start_time),
                           static_cast<double>(start_time) +
                               static_cast<double>(values.size() - 1),
                           lo - pad, hi + pad};
  if (values.size() == 1) canvas.x1 = canvas.x0 + 1.0;

  detail::svg_open(out);
  detail::svg_line(out, "axis", canvas.margin,
                   canvas.height - canvas.margin, canvas.width - canvas.margin,
                   canvas.height - canvas.margin, "black");
  out << "  <polyline class=\"series\" fill=\"none\" stroke=\"black\" "
         "points=\"";
  bool first = true;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (is_missing(values[i])) continue;
    if (!first) out << ' ';
    first = false;
    out << detail::svg_num(canvas.x(start_time + static_cast<double>(i)))
        << ',' << detail::svg_num(canvas.y(values[i]));
  }
  out << "\"/>\n";

  const int n = static_cast<int>(values.size());
  const int step = std::max(1, (n - 1) / 6);
  for (int i = 0; i < n; i += step)
    detail::svg_tick_label(out, canvas.x(start_time + i),
                           canvas.height - 18, std::to_string(start_time + i),
                           "middle");
  detail::svg_tick_label(out, canvas.margin - 6, canvas.y(hi) + 4,
                         detail::svg_num(hi), "end");
  detail::svg_tick_label(out, canvas.margin - 6, canvas.y(lo) + 4,
                         detail::svg_num(lo), "end");
  out << "</svg>\n";
}

}  // namespace tsdiag
