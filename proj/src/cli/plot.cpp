// Copyright 2026 The dfx Authors.
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

#include "dfx/cli/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "dfx/core/error.hpp"

namespace dfx::cli {

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 55;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& s) {
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

std::string fmt(double v) {
  char buf[32];
  if (v != 0 && (std::abs(v) < 1e-3 || std::abs(v) >= 1e5))
    std::snprintf(buf, sizeof(buf), "%.1e", v);
  else
    std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void header(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\" font-family=\"sans-serif\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
     << escape(title) << "</text>\n";
}

void axes(std::ostringstream& os, const Frame& f, const std::vector<double>& xt,
          const std::vector<double>& yt, const std::string& x_label, const std::string& y_label) {
  const double bottom = kHeight - kBottom, right = kWidth - kRight;
  for (double y : yt) {
    os << "<line x1=\"" << kLeft << "\" x2=\"" << right << "\" y1=\"" << f.py(y) << "\" y2=\""
       << f.py(y) << "\" stroke=\"#e0e0e0\"/>\n"
       << "<text x=\"" << kLeft - 6 << "\" y=\"" << f.py(y) + 4
       << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(y) << "</text>\n";
  }
  for (double x : xt)
    os << "<text x=\"" << f.px(x) << "\" y=\"" << bottom + 16
       << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(x) << "</text>\n";
  os << "<line x1=\"" << kLeft << "\" x2=\"" << right << "\" y1=\"" << bottom << "\" y2=\""
     << bottom << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft << "\" y1=\"" << kTop << "\" y2=\""
     << bottom << "\" stroke=\"black\"/>\n"
     << "<text x=\"" << (kLeft + right) / 2 << "\" y=\"" << kHeight - 14
     << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(x_label) << "</text>\n"
     << "<text transform=\"translate(18," << (kTop + bottom) / 2
     << ") rotate(-90)\" text-anchor=\"middle\" font-size=\"12\">" << escape(y_label)
     << "</text>\n";
}

}  // namespace

std::vector<double> nice_ticks(double lo, double hi, int n) {
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / std::max(1, n);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + step * 1e-9; t += step)
    out.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
  return out;
}

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!std::isfinite(x0)) throw ContractError("line_chart: no finite points");
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pad = (y1 - y0) * 0.05;
  Frame f{x0, x1, y0 - pad, y1 + pad};
  std::ostringstream os;
  header(os, title);
  axes(os, f, nice_ticks(x0, x1, 6), nice_ticks(f.y0, f.y1, 6), x_label, y_label);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
        os << f.px(s.x[i]) << "," << f.py(s.y[i]) << " ";
    os << "\"/>\n";
    const double ly = kTop + 14 + 18 * static_cast<double>(k);
    os << "<line x1=\"" << kWidth - kRight + 12 << "\" x2=\"" << kWidth - kRight + 32
       << "\" y1=\"" << ly - 4 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << kWidth - kRight + 38 << "\" y=\"" << ly << "\" font-size=\"11\">"
       << escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string bar_chart(const std::string& title, const std::string& y_label,
                      const std::vector<Bar>& bars, double y_min, double y_max) {
  if (bars.empty()) throw ContractError("bar_chart: no bars");
  if (!(y_max > y_min)) throw ContractError("bar_chart: empty y range");
  Frame f{0, static_cast<double>(bars.size()), y_min, y_max};
  std::ostringstream os;
  header(os, title);
  axes(os, f, {}, nice_ticks(y_min, y_max, 6), "", y_label);
  const double slot = f.px(1) - f.px(0);
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& b = bars[i];
    const double v = std::clamp(b.value, y_min, y_max);
    const double cx = f.px(static_cast<double>(i) + 0.5);
    os << "<rect x=\"" << cx - slot * 0.3 << "\" y=\"" << f.py(v) << "\" width=\"" << slot * 0.6
       << "\" height=\"" << f.py(y_min) - f.py(v) << "\" fill=\"" << kPalette[i % std::size(kPalette)]
       << "\"/>\n";
    if (b.error > 0) {
      const double lo = std::clamp(b.value - b.error, y_min, y_max);
      const double hi = std::clamp(b.value + b.error, y_min, y_max);
      os << "<line x1=\"" << cx << "\" x2=\"" << cx << "\" y1=\"" << f.py(lo) << "\" y2=\""
         << f.py(hi) << "\" stroke=\"black\"/>\n";
    }
    os << "<text x=\"" << cx << "\" y=\"" << kHeight - kBottom + 16
       << "\" text-anchor=\"middle\" font-size=\"11\">" << escape(b.label) << "</text>\n"
       << "<text x=\"" << cx << "\" y=\"" << f.py(v) - 4
       << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt(b.value) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace dfx::cli
