// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include "idpoe/svg.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace idpoe::svg {
namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                "#9467bd", "#8c564b", "#e377c2", "#17becf"};

const char* color(std::size_t i) { return kPalette[i % std::size(kPalette)]; }

struct Frame {
  double left = 70, right = 170, top = 40, bottom = 50;
  double width = 720, height = 420;
  double plot_w() const { return width - left - right; }
  double plot_h() const { return height - top - bottom; }
};

std::string num(double v) {
  std::ostringstream out;
  out << std::setprecision(4) << v;
  return out.str();
}

void open_svg(std::ostringstream& out, double w, double h) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << ' ' << h << "\" font-family=\"sans-serif\" "
      << "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

void title_and_labels(std::ostringstream& out, const Frame& f, const std::string& title,
                      const std::string& x_label, const std::string& y_label) {
  out << "<text x=\"" << f.left + f.plot_w() / 2 << "\" y=\"22\" text-anchor=\"middle\" "
      << "font-size=\"15\">" << escape(title) << "</text>\n";
  if (!x_label.empty()) {
    out << "<text x=\"" << f.left + f.plot_w() / 2 << "\" y=\"" << f.height - 12
        << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  }
  out << "<text transform=\"translate(18," << f.top + f.plot_h() / 2
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";
}

// Evenly spaced tick values covering [lo, hi].
std::vector<double> ticks(double lo, double hi, int count = 5) {
  std::vector<double> out;
  for (int i = 0; i <= count; ++i) out.push_back(lo + (hi - lo) * i / count);
  return out;
}

}  // namespace

std::string escape(const std::string& text) {
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

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series) {
  Frame f;
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const auto& s : series) {
    for (double v : s.x) x_lo = std::min(x_lo, v), x_hi = std::max(x_hi, v);
    for (double v : s.y) {
      if (std::isfinite(v)) y_lo = std::min(y_lo, v), y_hi = std::max(y_hi, v);
    }
  }
  if (!std::isfinite(x_lo)) x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  if (x_hi == x_lo) x_hi = x_lo + 1;
  y_lo = std::min(y_lo, 0.0);
  if (y_hi == y_lo) y_hi = y_lo + 1;
  auto px = [&](double x) { return f.left + (x - x_lo) / (x_hi - x_lo) * f.plot_w(); };
  auto py = [&](double y) { return f.top + (1 - (y - y_lo) / (y_hi - y_lo)) * f.plot_h(); };

  std::ostringstream out;
  open_svg(out, f.width, f.height);
  title_and_labels(out, f, title, x_label, y_label);
  out << "<rect x=\"" << f.left << "\" y=\"" << f.top << "\" width=\"" << f.plot_w()
      << "\" height=\"" << f.plot_h() << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (double t : ticks(y_lo, y_hi)) {
    out << "<text x=\"" << f.left - 6 << "\" y=\"" << py(t) + 4
        << "\" text-anchor=\"end\">" << num(t) << "</text>\n";
  }
  for (double t : ticks(x_lo, x_hi)) {
    out << "<text x=\"" << px(t) << "\" y=\"" << f.top + f.plot_h() + 16
        << "\" text-anchor=\"middle\">" << num(t) << "</text>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    out << "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << color(k)
        << "\" points=\"";
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (std::isfinite(s.y[i])) out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    }
    out << "\"/>\n";
    const double ly = f.top + 16 + 18 * static_cast<double>(k);
    out << "<line x1=\"" << f.width - f.right + 12 << "\" x2=\"" << f.width - f.right + 32
        << "\" y1=\"" << ly - 4 << "\" y2=\"" << ly - 4 << "\" stroke-width=\"3\" stroke=\""
        << color(k) << "\"/><text x=\"" << f.width - f.right + 38 << "\" y=\"" << ly << "\">"
        << escape(s.label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string bar_chart(const std::string& title, const std::string& y_label,
                      const std::vector<Bar>& bars) {
  Frame f;
  f.right = 30;
  f.bottom = 90;
  double hi = 0.0;
  for (const auto& b : bars) hi = std::max(hi, b.value + std::max(b.error, 0.0));
  if (hi <= 0) hi = 1;
  hi *= 1.1;
  auto py = [&](double y) { return f.top + (1 - y / hi) * f.plot_h(); };
  const double slot = f.plot_w() / std::max<std::size_t>(bars.size(), 1);

  std::ostringstream out;
  open_svg(out, f.width, f.height);
  title_and_labels(out, f, title, "", y_label);
  out << "<line x1=\"" << f.left << "\" x2=\"" << f.left + f.plot_w() << "\" y1=\""
      << py(0) << "\" y2=\"" << py(0) << "\" stroke=\"#444\"/>\n";
  for (double t : ticks(0, hi)) {
    out << "<text x=\"" << f.left - 6 << "\" y=\"" << py(t) + 4
        << "\" text-anchor=\"end\">" << num(t) << "</text>\n";
  }
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& b = bars[i];
    const double x = f.left + slot * static_cast<double>(i) + slot * 0.2;
    const double w = slot * 0.6;
    out << "<rect x=\"" << x << "\" y=\"" << py(b.value) << "\" width=\"" << w
        << "\" height=\"" << py(0) - py(b.value) << "\" fill=\"" << color(i) << "\"/>\n";
    if (b.error > 0) {
      const double cx = x + w / 2;
      out << "<line x1=\"" << cx << "\" x2=\"" << cx << "\" y1=\""
          << py(std::max(b.value - b.error, 0.0)) << "\" y2=\"" << py(b.value + b.error)
          << "\" stroke=\"black\"/>\n";
    }
    out << "<text x=\"" << x + w / 2 << "\" y=\"" << py(b.value) - 4
        << "\" text-anchor=\"middle\">" << num(b.value) << "</text>\n";
    out << "<text transform=\"translate(" << x + w / 2 << ',' << py(0) + 14
        << ") rotate(25)\">" << escape(b.label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string trajectory_panels(const std::vector<Panel>& panels, int height, int width) {
  const double side = 220, gap = 20, legend = 24;
  const int cols = std::max(1, std::min<int>(3, static_cast<int>(panels.size())));
  const int rows = (static_cast<int>(panels.size()) + cols - 1) / cols;
  const double total_w = cols * (side + gap) + gap;
  const double total_h = rows * (side + gap + legend) + gap + 40;
  const double scale = side / std::max(height, width);

  std::ostringstream out;
  open_svg(out, total_w, total_h);
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const double ox = gap + static_cast<double>(p % cols) * (side + gap);
    const double oy = gap + legend + static_cast<double>(p / cols) * (side + gap + legend);
    out << "<text x=\"" << ox << "\" y=\"" << oy - 6 << "\">" << escape(panels[p].title)
        << "</text>\n<rect x=\"" << ox << "\" y=\"" << oy << "\" width=\"" << width * scale
        << "\" height=\"" << height * scale << "\" fill=\"#f4f4f4\" stroke=\"#888\"/>\n";
    for (std::size_t k = 0; k < panels[p].paths.size(); ++k) {
      const auto& path = panels[p].paths[k];
      out << "<polyline fill=\"none\" stroke-width=\"" << (k == 0 ? 3 : 2) << "\" stroke=\""
          << (k == 0 ? "black" : color(k - 1)) << "\""
          << (k == 0 ? "" : " stroke-dasharray=\"5,3\"") << " points=\"";
      for (const auto& v : path.points) {
        out << ox + (v.x + 0.5) * scale << ',' << oy + (v.y + 0.5) * scale << ' ';
      }
      out << "\"><title>" << escape(path.label) << "</title></polyline>\n";
    }
  }
  // Shared legend from the first panel.
  if (!panels.empty()) {
    double lx = gap;
    const double ly = total_h - 14;
    for (std::size_t k = 0; k < panels[0].paths.size(); ++k) {
      out << "<line x1=\"" << lx << "\" x2=\"" << lx + 20 << "\" y1=\"" << ly - 4 << "\" y2=\""
          << ly - 4 << "\" stroke-width=\"3\" stroke=\"" << (k == 0 ? "black" : color(k - 1))
          << "\"/><text x=\"" << lx + 24 << "\" y=\"" << ly << "\">"
          << escape(panels[0].paths[k].label) << "</text>\n";
      lx += 40 + 7.0 * static_cast<double>(panels[0].paths[k].label.size());
    }
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace idpoe::svg
