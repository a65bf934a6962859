#pragma once

// Minimal static line plots as SVG.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "fracsym/error.hpp"

namespace fracsym::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

inline std::string render_svg(const std::string& title, const std::vector<Series>& series) {
  constexpr double W = 640, H = 420, ml = 60, mr = 20, mt = 40, mb = 40;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) y1 = y0 + 1.0;
  auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (W - ml - mr); };
  auto py = [&](double y) { return H - mb - (y - y0) / (y1 - y0) * (H - mt - mb); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\">\n", W, H);
  out += buf;
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf,
                "<text x=\"%g\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">%s</text>\n",
                ml, title.c_str());
  out += buf;
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" "
                "stroke=\"#444\"/>\n",
                ml, mt, W - ml - mr, H - mt - mb);
  out += buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"11\">"
                "x: [%.4g, %.4g]  y: [%.4g, %.4g]</text>\n",
                ml, H - 12, x0, x1, y0, y1);
  out += buf;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* c = colors[k % 5];
    out += "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"";
    out += c;
    out += "\" points=\"";
    for (std::size_t i = 0; i < series[k].x.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(series[k].x[i]), py(series[k].y[i]));
      out += buf;
    }
    out += "\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%g\" y=\"%g\" fill=\"%s\" font-family=\"sans-serif\" "
                  "font-size=\"12\">%s</text>\n",
                  W - mr - 150, mt + 16.0 * static_cast<double>(k + 1), c,
                  series[k].label.c_str());
    out += buf;
  }
  out += "</svg>\n";
  return out;
}

inline void write_svg(const std::string& path, const std::string& title,
                      const std::vector<Series>& series) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path + " for writing");
  os << render_svg(title, series);
  if (!os) throw Error("write failed: " + path);
}

} // namespace fracsym::plot
