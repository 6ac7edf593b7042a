#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "celltraffic/errors.hpp"
#include "celltraffic/io.hpp"

namespace celltraffic::plot {

struct Curve {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

struct PlotLabels {
  std::string title;
  std::string x_axis;
  std::string y_axis;
};

namespace detail {

inline constexpr double kWidth = 640.0, kHeight = 420.0;
inline constexpr double kLeft = 70.0, kRight = 150.0, kTop = 40.0, kBottom = 50.0;
inline constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                        "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline std::string num(double v) {
  auto s = fmt("%.2f", v);
  return s == "-0.00" ? "0.00" : s;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

// 1-2-5 tick spacing giving roughly `target` ticks over [lo, hi].
inline std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
  const double span = hi - lo;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) {
      step = m * mag;
      break;
    }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + step * 1e-9; t += step) ticks.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
  return ticks;
}

struct Range {
  double lo, hi;
};

inline Range padded(double lo, double hi) {
  if (hi == lo) {
    const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
    return {lo - pad, hi + pad};
  }
  const double pad = (hi - lo) * 0.05;
  return {lo - pad, hi + pad};
}

struct Frame {
  Range x, y;
  double sx(double v) const { return kLeft + (v - x.lo) / (x.hi - x.lo) * (kWidth - kLeft - kRight); }
  double sy(double v) const { return kHeight - kBottom - (v - y.lo) / (y.hi - y.lo) * (kHeight - kTop - kBottom); }
};

inline std::string axes(const Frame& f, const PlotLabels& labels) {
  std::string s;
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  s += "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) + "\" fill=\"white\"/>\n";
  s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x1) + "\" y2=\"" + num(y0) +
       "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x0) + "\" y2=\"" + num(y1) +
       "\" stroke=\"black\"/>\n";
  for (double t : nice_ticks(f.x.lo, f.x.hi)) {
    const double px = f.sx(t);
    s += "<line x1=\"" + num(px) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(px) + "\" y2=\"" + num(y0 + 5) +
         "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(px) + "\" y=\"" + num(y0 + 18) + "\" text-anchor=\"middle\" font-size=\"11\">" +
         fmt("%g", t) + "</text>\n";
  }
  for (double t : nice_ticks(f.y.lo, f.y.hi)) {
    const double py = f.sy(t);
    s += "<line x1=\"" + num(x0 - 5) + "\" y1=\"" + num(py) + "\" x2=\"" + num(x0) + "\" y2=\"" + num(py) +
         "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(x0 - 8) + "\" y=\"" + num(py + 4) + "\" text-anchor=\"end\" font-size=\"11\">" +
         fmt("%g", t) + "</text>\n";
  }
  s += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(kHeight - 12) + "\" text-anchor=\"middle\" font-size=\"13\">" +
       escape(labels.x_axis) + "</text>\n";
  s += "<text x=\"16\" y=\"" + num((y0 + y1) / 2) + "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 " +
       num((y0 + y1) / 2) + ")\">" + escape(labels.y_axis) + "</text>\n";
  s += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
       escape(labels.title) + "</text>\n";
  return s;
}

inline std::string header() {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) +
         "\" height=\"" + num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n";
}

}  // namespace detail

/// Standalone SVG line chart: one <polyline> per curve, axes with 1-2-5
/// ticks, and a legend. Output depends only on the input values.
inline std::string render_line_plot(const std::vector<Curve>& curves, const PlotLabels& labels = {}) {
  if (curves.empty()) throw DomainError("line plot needs at least one curve");
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& c : curves) {
    if (c.points.size() < 2) throw DomainError("curve '" + c.label + "' needs at least two points");
    for (const auto& [x, y] : c.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) throw DomainError("curve '" + c.label + "' has a non-finite value");
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  const detail::Frame f{detail::padded(xmin, xmax), detail::padded(ymin, ymax)};
  std::string s = detail::header() + detail::axes(f, labels);
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = detail::kPalette[i % detail::kPalette.size()];
    s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t p = 0; p < curves[i].points.size(); ++p) {
      if (p) s += " ";
      s += detail::num(f.sx(curves[i].points[p].first)) + "," + detail::num(f.sy(curves[i].points[p].second));
    }
    s += "\"/>\n";
    const double ly = detail::kTop + 10.0 + 18.0 * static_cast<double>(i);
    const double lx = detail::kWidth - detail::kRight + 15.0;
    s += "<line x1=\"" + detail::num(lx) + "\" y1=\"" + detail::num(ly) + "\" x2=\"" + detail::num(lx + 20) + "\" y2=\"" +
         detail::num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + detail::num(lx + 26) + "\" y=\"" + detail::num(ly + 4) + "\" font-size=\"11\">" +
         detail::escape(curves[i].label) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

inline void emit_line_plot(const std::vector<Curve>& curves, const std::filesystem::path& path,
                           const PlotLabels& labels = {}) {
  io::write_file_atomic(path, render_line_plot(curves, labels));
}

/// Scatter of 2-D points, coloured by integer group (e.g. class label).
inline std::string render_scatter_plot(const std::vector<std::pair<double, double>>& points,
                                       const std::vector<int>& groups, const PlotLabels& labels = {}) {
  if (points.empty()) throw DomainError("scatter plot needs at least one point");
  if (!groups.empty() && groups.size() != points.size()) throw DomainError("group count does not match points");
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& [x, y] : points) {
    if (!std::isfinite(x) || !std::isfinite(y)) throw DomainError("scatter plot has a non-finite value");
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
  const detail::Frame f{detail::padded(xmin, xmax), detail::padded(ymin, ymax)};
  std::string s = detail::header() + detail::axes(f, labels);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const int g = groups.empty() ? 0 : groups[i];
    const char* color = detail::kPalette[static_cast<std::size_t>(std::abs(g)) % detail::kPalette.size()];
    s += "<circle cx=\"" + detail::num(f.sx(points[i].first)) + "\" cy=\"" + detail::num(f.sy(points[i].second)) +
         "\" r=\"2.5\" fill=\"" + color + "\" fill-opacity=\"0.7\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

inline void emit_scatter_plot(const std::vector<std::pair<double, double>>& points, const std::vector<int>& groups,
                              const std::filesystem::path& path, const PlotLabels& labels = {}) {
  io::write_file_atomic(path, render_scatter_plot(points, groups, labels));
}

}  // namespace celltraffic::plot
