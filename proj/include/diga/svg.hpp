#pragma once

#include <string>
#include <vector>

namespace diga::viz {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  int width = 720;
  int height = 420;
};

// Static SVG with axes, five ticks per axis and a legend. Non-finite points
// are skipped; an empty chart still renders its frame.
std::string render(const LineChart& chart);

}  // namespace diga::viz
