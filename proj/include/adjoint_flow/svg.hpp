#pragma once

// Minimal deterministic SVG line plots of trace columns.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "adjoint_flow/errors.hpp"
#include "adjoint_flow/io.hpp"
#include "adjoint_flow/trace.hpp"

namespace adjoint_flow {

enum class Axes { linear, log_log };

/// Reference line value = c * t^exponent, with c chosen so the line passes
/// through the first positive sample of `anchor_column`.
struct PowerGuide {
  double exponent = -0.5;
  std::string anchor_column;
  std::string label;
};

namespace detail {

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  return colors[i % 6];
}

inline std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

inline std::string emit_svg(const TraceRecord& trace, const std::vector<std::string>& columns, Axes axes,
                            const std::vector<PowerGuide>& guides = {}, const std::string& title = "") {
  if (trace.empty()) throw Error("cannot plot an empty trace");
  if (columns.empty()) throw Error("no columns to plot");
  const auto names = trace.column_names();
  for (const auto& c : columns)
    if (std::find(names.begin(), names.end(), c) == names.end()) throw Error("trace has no column '" + c + "'");

  const bool log = axes == Axes::log_log;
  auto usable = [&](double t, double v) { return std::isfinite(t) && std::isfinite(v) && (!log || (t > 0.0 && v > 0.0)); };
  auto tx = [&](double v) { return log ? std::log10(v) : v; };

  const std::vector<double> t = trace.column("t");
  std::vector<std::vector<double>> series;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& c : columns) {
    series.push_back(trace.column(c));
    for (std::size_t i = 0; i < t.size(); ++i)
      if (usable(t[i], series.back()[i])) {
        xmin = std::min(xmin, tx(t[i]));
        xmax = std::max(xmax, tx(t[i]));
        ymin = std::min(ymin, tx(series.back()[i]));
        ymax = std::max(ymax, tx(series.back()[i]));
      }
  }
  if (!std::isfinite(xmin)) throw Error("no plottable samples in the selected columns");
  if (xmax - xmin <= 0.0) xmin -= 0.5, xmax += 0.5;
  if (ymax - ymin <= 0.0) ymin -= 0.5, ymax += 0.5;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  const double W = 640, H = 420, L = 70, R = 160, T = 30, B = 50;
  const double pw = W - L - R, ph = H - T - B;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return T + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" viewBox=\"0 0 640 420\" "
       "font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
  if (!title.empty())
    s += "<text x=\"" + detail::fmt("%.2f", L + pw / 2) + "\" y=\"18\" text-anchor=\"middle\">" +
         detail::escape_xml(title) + "</text>\n";
  s += "<rect x=\"" + detail::fmt("%.2f", L) + "\" y=\"" + detail::fmt("%.2f", T) + "\" width=\"" +
       detail::fmt("%.2f", pw) + "\" height=\"" + detail::fmt("%.2f", ph) + "\" fill=\"none\" stroke=\"black\"/>\n";

  auto ticks = [&](double lo, double hi) {
    std::vector<double> out;
    if (log) {
      for (double d = std::ceil(lo); d <= std::floor(hi); d += 1.0) out.push_back(d);
    } else {
      for (int k = 0; k <= 4; ++k) out.push_back(lo + (hi - lo) * k / 4.0);
    }
    return out;
  };
  auto label = [&](double v) { return log ? "1e" + detail::fmt("%.0f", v) : detail::fmt("%.3g", v); };
  for (double x : ticks(xmin, xmax)) {
    s += "<line x1=\"" + detail::fmt("%.2f", px(x)) + "\" y1=\"" + detail::fmt("%.2f", T + ph) + "\" x2=\"" +
         detail::fmt("%.2f", px(x)) + "\" y2=\"" + detail::fmt("%.2f", T + ph + 5) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + detail::fmt("%.2f", px(x)) + "\" y=\"" + detail::fmt("%.2f", T + ph + 18) +
         "\" text-anchor=\"middle\">" + label(x) + "</text>\n";
  }
  for (double y : ticks(ymin, ymax)) {
    s += "<line x1=\"" + detail::fmt("%.2f", L - 5) + "\" y1=\"" + detail::fmt("%.2f", py(y)) + "\" x2=\"" +
         detail::fmt("%.2f", L) + "\" y2=\"" + detail::fmt("%.2f", py(y)) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + detail::fmt("%.2f", L - 8) + "\" y=\"" + detail::fmt("%.2f", py(y) + 4) +
         "\" text-anchor=\"end\">" + label(y) + "</text>\n";
  }
  s += "<text x=\"" + detail::fmt("%.2f", L + pw / 2) + "\" y=\"" + detail::fmt("%.2f", H - 10) +
       "\" text-anchor=\"middle\">t</text>\n";

  std::size_t legend = 0;
  auto legend_entry = [&](const std::string& text, const char* color, bool dashed) {
    const double y = T + 12 + 16.0 * static_cast<double>(legend++);
    s += "<line x1=\"" + detail::fmt("%.2f", L + pw + 10) + "\" y1=\"" + detail::fmt("%.2f", y) + "\" x2=\"" +
         detail::fmt("%.2f", L + pw + 30) + "\" y2=\"" + detail::fmt("%.2f", y) + "\" stroke=\"" + color + "\"" +
         (dashed ? " stroke-dasharray=\"4 3\"" : "") + "/>\n";
    s += "<text x=\"" + detail::fmt("%.2f", L + pw + 35) + "\" y=\"" + detail::fmt("%.2f", y + 4) + "\">" +
         detail::escape_xml(text) + "</text>\n";
  };

  for (std::size_t c = 0; c < columns.size(); ++c) {
    std::string pts;
    auto flush = [&] {
      if (!pts.empty())
        s += "<polyline fill=\"none\" stroke=\"" + std::string(detail::palette(c)) + "\" stroke-width=\"1.5\" points=\"" +
             pts + "\"/>\n";
      pts.clear();
    };
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!usable(t[i], series[c][i])) {
        flush();
        continue;
      }
      if (!pts.empty()) pts += ' ';
      pts += detail::fmt("%.2f", px(tx(t[i]))) + "," + detail::fmt("%.2f", py(tx(series[c][i])));
    }
    flush();
    legend_entry(columns[c], detail::palette(c), false);
  }

  for (const PowerGuide& g : guides) {
    if (!log) throw Error("power-law guides need log-log axes");
    const std::vector<double> v = trace.column(g.anchor_column);
    std::size_t anchor = t.size();
    for (std::size_t i = 0; i < t.size(); ++i)
      if (usable(t[i], v[i])) {
        anchor = i;
        break;
      }
    if (anchor == t.size()) throw Error("guide anchor column '" + g.anchor_column + "' has no positive samples");
    // log10 y = log10 v_a + p (log10 t - log10 t_a), clipped to the plot box in x.
    const double x0 = std::log10(t[anchor]), y0 = std::log10(v[anchor]);
    const double y_lo = y0 + g.exponent * (xmin - x0), y_hi = y0 + g.exponent * (xmax - x0);
    s += "<line x1=\"" + detail::fmt("%.2f", px(xmin)) + "\" y1=\"" + detail::fmt("%.2f", py(y_lo)) + "\" x2=\"" +
         detail::fmt("%.2f", px(xmax)) + "\" y2=\"" + detail::fmt("%.2f", py(y_hi)) +
         "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    legend_entry(g.label.empty() ? "t^" + detail::fmt("%g", g.exponent) : g.label, "gray", true);
  }
  s += "</svg>\n";
  return s;
}

/// Renders first, so a failed render leaves no file behind.
inline void write_svg(const std::string& path, const TraceRecord& trace, const std::vector<std::string>& columns,
                      Axes axes, const std::vector<PowerGuide>& guides = {}, const std::string& title = "") {
  const std::string doc = emit_svg(trace, columns, axes, guides, title);
  write_file_atomic(path, doc);
}

}  // namespace adjoint_flow
