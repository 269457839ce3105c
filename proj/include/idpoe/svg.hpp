// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "idpoe/core.hpp"

/// Minimal static SVG charts for evaluation reports.
namespace idpoe::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series);

struct Bar {
  std::string label;
  double value = 0.0;
  double error = 0.0;  ///< drawn as a +-error whisker when positive
};

std::string bar_chart(const std::string& title, const std::string& y_label,
                      const std::vector<Bar>& bars);

struct Path {
  std::string label;
  PixelTrajectory points;
};

/// One square panel per clip showing the image frame and the paths in pixel
/// coordinates. The first path of each panel is drawn as ground truth.
struct Panel {
  std::string title;
  std::vector<Path> paths;
};

std::string trajectory_panels(const std::vector<Panel>& panels, int height, int width);

/// Escapes &, <, > and quotes for text nodes and attributes.
std::string escape(const std::string& text);

}  // namespace idpoe::svg
