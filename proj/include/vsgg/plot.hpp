#pragma once

#include <string>
#include <utility>
#include <vector>

namespace vsgg {

// One named curve; x values are implicit indices when xs is empty.
struct PlotSeries {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
};

// Static SVG line chart (loss curves, recall-vs-K). Deterministic output.
void write_svg_chart(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<PlotSeries>& series);

}  // namespace vsgg
