#include "vsgg/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "vsgg/dataset_io.hpp"

namespace vsgg {
namespace {

constexpr int kWidth = 720;
constexpr int kHeight = 440;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 30;
constexpr int kMarginTop = 50;
constexpr int kMarginBottom = 60;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                         "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<PlotSeries>& series) {
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  bool any = false;
  for (const PlotSeries& s : series) {
    for (size_t i = 0; i < s.ys.size(); ++i) {
      const double x = s.xs.empty() ? static_cast<double>(i) : s.xs[i];
      if (!any) {
        xmin = xmax = x;
        ymin = ymax = s.ys[i];
        any = true;
      }
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, s.ys[i]);
      ymax = std::max(ymax, s.ys[i]);
    }
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  const auto px = [&](double x) {
    return kMarginLeft + (x - xmin) / (xmax - xmin) * plot_w;
  };
  const auto py = [&](double y) {
    return kMarginTop + (1.0 - (y - ymin) / (ymax - ymin)) * plot_h;
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kWidth) +
         "\" height=\"" + std::to_string(kHeight) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + std::to_string(kWidth / 2) +
         "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" font-family=\"sans-serif\">" +
         title + "</text>\n";

  // axes
  svg += "<line x1=\"" + fmt(kMarginLeft) + "\" y1=\"" + fmt(kMarginTop) + "\" x2=\"" +
         fmt(kMarginLeft) + "\" y2=\"" + fmt(kMarginTop + plot_h) +
         "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + fmt(kMarginLeft) + "\" y1=\"" + fmt(kMarginTop + plot_h) +
         "\" x2=\"" + fmt(kMarginLeft + plot_w) + "\" y2=\"" + fmt(kMarginTop + plot_h) +
         "\" stroke=\"black\"/>\n";

  for (int t = 0; t <= 4; ++t) {
    const double fy = ymin + (ymax - ymin) * t / 4.0;
    const double fx = xmin + (xmax - xmin) * t / 4.0;
    svg += "<text x=\"" + fmt(kMarginLeft - 8) + "\" y=\"" + fmt(py(fy) + 4) +
           "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" +
           fmt(fy) + "</text>\n";
    svg += "<text x=\"" + fmt(px(fx)) + "\" y=\"" + fmt(kMarginTop + plot_h + 18) +
           "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" +
           fmt(fx) + "</text>\n";
    svg += "<line x1=\"" + fmt(kMarginLeft) + "\" y1=\"" + fmt(py(fy)) + "\" x2=\"" +
           fmt(kMarginLeft + plot_w) + "\" y2=\"" + fmt(py(fy)) +
           "\" stroke=\"#dddddd\"/>\n";
  }

  svg += "<text x=\"" + std::to_string(kWidth / 2) + "\" y=\"" +
         std::to_string(kHeight - 16) +
         "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" +
         x_label + "</text>\n";
  svg += "<text x=\"18\" y=\"" + std::to_string(kHeight / 2) +
         "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
         "transform=\"rotate(-90 18 " +
         std::to_string(kHeight / 2) + ")\">" + y_label + "</text>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    const PlotSeries& s = series[si];
    if (s.ys.empty()) continue;
    std::string pts;
    for (size_t i = 0; i < s.ys.size(); ++i) {
      const double x = s.xs.empty() ? static_cast<double>(i) : s.xs[i];
      pts += fmt(px(x)) + "," + fmt(py(s.ys[i])) + " ";
    }
    const char* color = kColors[si % (sizeof(kColors) / sizeof(kColors[0]))];
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    svg += "<text x=\"" + fmt(kMarginLeft + plot_w - 6) + "\" y=\"" +
           fmt(kMarginTop + 16 + 16 * si) +
           "\" text-anchor=\"end\" font-size=\"12\" font-family=\"sans-serif\" fill=\"" +
           color + "\">" + s.label + "</text>\n";
  }
  svg += "</svg>\n";
  write_file(path, svg);
}

}  // namespace vsgg
