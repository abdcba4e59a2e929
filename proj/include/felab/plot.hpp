// Copyright 2026 The felab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Minimal SVG line plots: one or more (x, y) curves, optional log y axis.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "felab/error.hpp"

namespace felab {

struct PlotCurve {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

inline std::string render_svg(const std::string& title, const std::vector<PlotCurve>& curves,
                              bool log_y = false) {
  constexpr double W = 640, H = 400, L = 70, R = 20, Tm = 30, B = 40;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.x.size() && i < c.y.size(); ++i) {
      if (!std::isfinite(c.y[i]) || (log_y && !(c.y[i] > 0.0))) continue;
      x0 = std::min(x0, c.x[i]);
      x1 = std::max(x1, c.x[i]);
      y0 = std::min(y0, ty(c.y[i]));
      y1 = std::max(y1, ty(c.y[i]));
    }
  }
  if (!(x1 >= x0)) x0 = 0, x1 = 1;
  if (!(y1 >= y0)) y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (ty(y) - y0) / (y1 - y0) * (H - Tm - B); };

  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << title
     << "</text>\n"
     << "<rect x=\"" << L << "\" y=\"" << Tm << "\" width=\"" << W - L - R << "\" height=\""
     << H - Tm - B << "\" fill=\"none\" stroke=\"black\"/>\n";
  auto ylabel = [&](double v) {
    std::ostringstream s;
    s.precision(4);
    s << (log_y ? std::pow(10.0, v) : v);
    return s.str();
  };
  os << "<text x=\"" << L - 4 << "\" y=\"" << H - B << "\" text-anchor=\"end\">" << ylabel(y0)
     << "</text>\n<text x=\"" << L - 4 << "\" y=\"" << Tm + 10 << "\" text-anchor=\"end\">"
     << ylabel(y1) << "</text>\n<text x=\"" << L << "\" y=\"" << H - B + 14 << "\">" << x0
     << "</text>\n<text x=\"" << W - R << "\" y=\"" << H - B + 14 << "\" text-anchor=\"end\">"
     << x1 << "</text>\n";
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const char* col = colors[c % 6];
    os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\""
       << (curves[c].dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"";
    for (std::size_t i = 0; i < curves[c].x.size() && i < curves[c].y.size(); ++i) {
      const double y = curves[c].y[i];
      if (!std::isfinite(y) || (log_y && !(y > 0.0))) continue;
      os << px(curves[c].x[i]) << "," << py(y) << " ";
    }
    os << "\"/>\n<text x=\"" << L + 8 << "\" y=\"" << Tm + 16 + 14 * c << "\" fill=\"" << col
       << "\">" << curves[c].label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline void write_svg(const std::string& path, const std::string& title,
                      const std::vector<PlotCurve>& curves, bool log_y = false) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << render_svg(title, curves, log_y);
}

}  // namespace felab
