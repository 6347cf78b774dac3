// SPDX-License-Identifier: Apache-2.0
//
// Minimal line-plot rasteriser writing PNG files (built-in 5x7 font).
#pragma once

#include <map>
#include <string>
#include <vector>

namespace lamsc::plot {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

struct PlotSpec {
  std::string title, x_label, y_label;
  std::vector<Series> series;
  std::map<std::string, std::string> metadata;  // stored as PNG text chunks
  int width = 640;
  int height = 420;
};

void write_line_plot(const std::string& path, const PlotSpec& spec);

}  // namespace lamsc::plot
