/*
 * Copyright 2026 The roarbench Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "roarbench/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "roarbench/errors.hpp"

namespace roarbench::svg {

namespace {

constexpr double kWidth = 720, kHeight = 480;
constexpr double kLeft = 70, kRight = 200, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string Escape(const std::string& text) {
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

std::string TickLabel(double v, bool percent) {
  char buf[32];
  if (percent) {
    std::snprintf(buf, sizeof buf, "%g%%", std::round(v * 1000.0) / 10.0);
  } else {
    std::snprintf(buf, sizeof buf, "%g", v);
  }
  return buf;
}

}  // namespace

std::string Render(const Chart& c) {
  Require(c.x_max > c.x_min && c.y_max > c.y_min, "empty chart range");
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - c.x_min) / (c.x_max - c.x_min) * pw; };
  auto py = [&](double y) {
    y = std::clamp(y, c.y_min, c.y_max);
    return kTop + (1.0 - (y - c.y_min) / (c.y_max - c.y_min)) * ph;
  };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
    << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' '
    << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << Num(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" "
       "font-size=\"15\">" << Escape(c.title) << "</text>\n";

  for (double t : c.y_ticks) {
    s << "<line x1=\"" << Num(kLeft) << "\" x2=\"" << Num(kLeft + pw)
      << "\" y1=\"" << Num(py(t)) << "\" y2=\"" << Num(py(t))
      << "\" stroke=\"#e5e5e5\"/>\n";
    s << "<text x=\"" << Num(kLeft - 8) << "\" y=\"" << Num(py(t) + 4)
      << "\" text-anchor=\"end\">" << TickLabel(t, false) << "</text>\n";
  }
  for (double t : c.x_ticks) {
    s << "<line x1=\"" << Num(px(t)) << "\" x2=\"" << Num(px(t)) << "\" y1=\""
      << Num(kTop + ph) << "\" y2=\"" << Num(kTop + ph + 5)
      << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << Num(px(t)) << "\" y=\"" << Num(kTop + ph + 18)
      << "\" text-anchor=\"middle\">" << TickLabel(t, c.x_percent) << "</text>\n";
  }
  s << "<rect x=\"" << Num(kLeft) << "\" y=\"" << Num(kTop) << "\" width=\""
    << Num(pw) << "\" height=\"" << Num(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  s << "<text x=\"" << Num(kLeft + pw / 2) << "\" y=\"" << Num(kHeight - 18)
    << "\" text-anchor=\"middle\">" << Escape(c.x_label) << "</text>\n";
  s << "<text transform=\"translate(18," << Num(kTop + ph / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">" << Escape(c.y_label)
    << "</text>\n";

  for (std::size_t i = 0; i < c.series.size(); ++i) {
    const Series& series = c.series[i];
    Require(series.x.size() == series.y.size(), "series x/y length mismatch");
    const char* color = kPalette[i % std::size(kPalette)];
    if (!series.low.empty()) {
      Require(series.low.size() == series.y.size() &&
                  series.high.size() == series.y.size(),
              "band length mismatch");
      s << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
      for (std::size_t k = 0; k < series.x.size(); ++k) {
        if (std::isfinite(series.high[k])) {
          s << Num(px(series.x[k])) << ',' << Num(py(series.high[k])) << ' ';
        }
      }
      for (std::size_t k = series.x.size(); k-- > 0;) {
        if (std::isfinite(series.low[k])) {
          s << Num(px(series.x[k])) << ',' << Num(py(series.low[k])) << ' ';
        }
      }
      s << "\"/>\n";
    }
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"";
    if (series.dashed) s << " stroke-dasharray=\"6,4\"";
    s << " points=\"";
    for (std::size_t k = 0; k < series.x.size(); ++k) {
      if (std::isfinite(series.y[k])) {
        s << Num(px(series.x[k])) << ',' << Num(py(series.y[k])) << ' ';
      }
    }
    s << "\"/>\n";
    const double ly = kTop + 10 + 20 * static_cast<double>(i);
    s << "<line x1=\"" << Num(kLeft + pw + 15) << "\" x2=\"" << Num(kLeft + pw + 40)
      << "\" y1=\"" << Num(ly) << "\" y2=\"" << Num(ly) << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"" << (series.dashed ? " stroke-dasharray=\"6,4\"" : "")
      << "/>\n";
    s << "<text x=\"" << Num(kLeft + pw + 46) << "\" y=\"" << Num(ly + 4) << "\">"
      << Escape(series.label) << "</text>\n";
  }
  if (c.rule) {
    s << "<line x1=\"" << Num(kLeft) << "\" x2=\"" << Num(kLeft + pw) << "\" y1=\""
      << Num(py(*c.rule)) << "\" y2=\"" << Num(py(*c.rule))
      << "\" stroke=\"black\" stroke-dasharray=\"2,3\"/>\n";
    const double ly = kTop + 10 + 20 * static_cast<double>(c.series.size());
    s << "<line x1=\"" << Num(kLeft + pw + 15) << "\" x2=\"" << Num(kLeft + pw + 40)
      << "\" y1=\"" << Num(ly) << "\" y2=\"" << Num(ly)
      << "\" stroke=\"black\" stroke-dasharray=\"2,3\"/>\n";
    s << "<text x=\"" << Num(kLeft + pw + 46) << "\" y=\"" << Num(ly + 4) << "\">"
      << Escape(c.rule_label) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace roarbench::svg
