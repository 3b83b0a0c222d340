#ifndef CSL_PLOT_HPP
#define CSL_PLOT_HPP

#include "csl/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace csl {

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

/// Dashed reference line y = anchor_y * (x / anchor_x)^exponent on log-log axes
/// (a straight line of the given slope on linear axes).
struct GuideLine {
  double exponent = -1.0;
  double anchor_x = 1.0;
  double anchor_y = 1.0;
  std::string label;
};

struct PlotSpec {
  std::string title;
  std::string xlabel = "t";
  std::string ylabel;
  bool log_x = false;
  bool log_y = false;
  std::vector<PlotSeries> series;
  std::vector<GuideLine> guides;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v, bool logv) {
  char buf[32];
  if (logv) {
    std::snprintf(buf, sizeof buf, "1e%d", static_cast<int>(std::lround(v)));
  } else {
    std::snprintf(buf, sizeof buf, "%.3g", v);
  }
  return buf;
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

inline std::vector<double> linear_ticks(double lo, double hi) {
  double span = hi - lo;
  if (span <= 0) return {lo};
  double raw = span / 5.0;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  std::vector<double> t;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) t.push_back(v);
  return t;
}

}  // namespace detail

/// Standalone SVG line chart. Output depends only on the spec.
inline std::string render_svg(const PlotSpec& spec) {
  if (spec.series.empty()) throw ConfigError("plot: no series");
  const double W = 640, H = 420, ml = 70, mr = 20, mt = 36, mb = 50;
  auto tx = [&](double v) { return spec.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return spec.log_y ? std::log10(v) : v; };
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : spec.series) {
    if (s.x.size() != s.y.size()) throw ConfigError("plot: series '" + s.label + "' has mismatched lengths");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      double x = s.x[i], y = s.y[i];
      if (std::isnan(x) || std::isnan(y)) continue;
      if (spec.log_x && !(x > 0)) throw ConfigError("plot: nonpositive x on log axis in series '" + s.label + "'");
      if (spec.log_y && !(y > 0)) throw ConfigError("plot: nonpositive y on log axis in series '" + s.label + "'");
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      xmin = std::min(xmin, tx(x));
      xmax = std::max(xmax, tx(x));
      ymin = std::min(ymin, ty(y));
      ymax = std::max(ymax, ty(y));
    }
  }
  if (!(xmin <= xmax)) throw ConfigError("plot: no finite data");
  if (xmax == xmin) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax == ymin) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  double pad = 0.04 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  const double pw = W - ml - mr, ph = H - mt - mb;
  auto px = [&](double u) { return ml + (u - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double u) { return mt + (1.0 - (u - ymin) / (ymax - ymin)) * ph; };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << detail::fmt(W / 2) << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"15\">"
    << detail::escape(spec.title) << "</text>\n";
  o << "<defs><clipPath id=\"plot\"><rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\""
    << ph << "\"/></clipPath></defs>\n";
  // axes and ticks
  o << "<g font-family=\"sans-serif\" font-size=\"11\" stroke=\"black\">\n";
  o << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\"/>\n";
  auto ticks = [&](double lo, double hi, bool logv) {
    if (logv) {
      std::vector<double> t;
      for (double v = std::ceil(lo); v <= std::floor(hi); v += 1.0) t.push_back(v);
      if (t.size() > 12) {
        std::vector<double> thin;
        std::size_t every = (t.size() + 9) / 10;
        for (std::size_t i = 0; i < t.size(); i += every) thin.push_back(t[i]);
        t = thin;
      }
      return t;
    }
    return detail::linear_ticks(lo, hi);
  };
  for (double v : ticks(xmin, xmax, spec.log_x)) {
    double x = px(v);
    o << "<line x1=\"" << detail::fmt(x) << "\" y1=\"" << detail::fmt(mt + ph) << "\" x2=\"" << detail::fmt(x)
      << "\" y2=\"" << detail::fmt(mt + ph + 5) << "\"/>\n";
    o << "<text x=\"" << detail::fmt(x) << "\" y=\"" << detail::fmt(mt + ph + 18)
      << "\" text-anchor=\"middle\" stroke=\"none\">" << detail::tick_label(v, spec.log_x) << "</text>\n";
  }
  for (double v : ticks(ymin, ymax, spec.log_y)) {
    double y = py(v);
    o << "<line x1=\"" << detail::fmt(ml - 5) << "\" y1=\"" << detail::fmt(y) << "\" x2=\"" << detail::fmt(ml)
      << "\" y2=\"" << detail::fmt(y) << "\"/>\n";
    o << "<text x=\"" << detail::fmt(ml - 8) << "\" y=\"" << detail::fmt(y + 4)
      << "\" text-anchor=\"end\" stroke=\"none\">" << detail::tick_label(v, spec.log_y) << "</text>\n";
  }
  o << "</g>\n";
  o << "<text x=\"" << detail::fmt(ml + pw / 2) << "\" y=\"" << detail::fmt(H - 10)
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << detail::escape(spec.xlabel)
    << "</text>\n";
  o << "<text x=\"16\" y=\"" << detail::fmt(mt + ph / 2) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"12\" transform=\"rotate(-90 16 "
    << detail::fmt(mt + ph / 2) << ")\">" << detail::escape(spec.ylabel) << "</text>\n";

  o << "<g clip-path=\"url(#plot)\" fill=\"none\" stroke-width=\"1.5\">\n";
  for (std::size_t k = 0; k < spec.series.size(); ++k) {
    const auto& s = spec.series[k];
    std::string pts;
    auto flush = [&] {
      if (!pts.empty())
        o << "<polyline stroke=\"" << palette[k % 10] << "\" points=\"" << pts << "\"/>\n";
      pts.clear();
    };
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      double x = s.x[i], y = s.y[i];
      if (!std::isfinite(x) || !std::isfinite(y)) {
        flush();
        continue;
      }
      if (!pts.empty()) pts += ' ';
      pts += detail::fmt(px(tx(x))) + "," + detail::fmt(py(ty(y)));
    }
    flush();
  }
  for (const auto& g : spec.guides) {
    double u0 = xmin, u1 = xmax;
    auto gy = [&](double u) {
      if (spec.log_x && spec.log_y) return std::log10(g.anchor_y) + g.exponent * (u - std::log10(g.anchor_x));
      return ty(g.anchor_y) + g.exponent * (u - tx(g.anchor_x));
    };
    o << "<line stroke=\"black\" stroke-dasharray=\"6,4\" stroke-width=\"1\" x1=\"" << detail::fmt(px(u0))
      << "\" y1=\"" << detail::fmt(py(gy(u0))) << "\" x2=\"" << detail::fmt(px(u1)) << "\" y2=\""
      << detail::fmt(py(gy(u1))) << "\"/>\n";
  }
  o << "</g>\n";
  // legend
  o << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  double ly = mt + 14;
  for (std::size_t k = 0; k < spec.series.size(); ++k, ly += 16) {
    o << "<line x1=\"" << detail::fmt(ml + pw - 150) << "\" y1=\"" << detail::fmt(ly - 4) << "\" x2=\""
      << detail::fmt(ml + pw - 128) << "\" y2=\"" << detail::fmt(ly - 4) << "\" stroke=\"" << palette[k % 10]
      << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << detail::fmt(ml + pw - 122) << "\" y=\"" << detail::fmt(ly) << "\">"
      << detail::escape(spec.series[k].label) << "</text>\n";
  }
  for (const auto& g : spec.guides) {
    if (g.label.empty()) continue;
    o << "<line x1=\"" << detail::fmt(ml + pw - 150) << "\" y1=\"" << detail::fmt(ly - 4) << "\" x2=\""
      << detail::fmt(ml + pw - 128) << "\" y2=\"" << detail::fmt(ly - 4)
      << "\" stroke=\"black\" stroke-dasharray=\"6,4\"/>\n";
    o << "<text x=\"" << detail::fmt(ml + pw - 122) << "\" y=\"" << detail::fmt(ly) << "\">"
      << detail::escape(g.label) << "</text>\n";
    ly += 16;
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

inline void emit_plot(const PlotSpec& spec, const std::string& path) {
  std::string svg = render_svg(spec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write plot: " + path);
  out << svg;
}

}  // namespace csl

#endif  // CSL_PLOT_HPP
