#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vsgg {

// Axis-aligned box in normalized image coordinates, (x, y) top-left corner.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }
  double x2() const { return x + w; }
  double y2() const { return y + h; }
  double area() const { return w * h; }

  bool valid_normalized() const {
    return x >= 0.0 && y >= 0.0 && w > 0.0 && h > 0.0 && x2() <= 1.0 + 1e-12 &&
           y2() <= 1.0 + 1e-12;
  }
};

inline bool operator==(const Box& a, const Box& b) {
  return a.x == b.x && a.y == b.y && a.w == b.w && a.h == b.h;
}

// Smallest axis-aligned box containing both inputs.
inline Box union_box(const Box& a, const Box& b) {
  const double x1 = std::min(a.x, b.x);
  const double y1 = std::min(a.y, b.y);
  const double x2 = std::max(a.x2(), b.x2());
  const double y2 = std::max(a.y2(), b.y2());
  return Box{x1, y1, x2 - x1, y2 - y1};
}

inline double center_distance(const Box& a, const Box& b) {
  const double dx = a.cx() - b.cx();
  const double dy = a.cy() - b.cy();
  return std::sqrt(dx * dx + dy * dy);
}

// Intersection-over-union; degenerate boxes score 0.
inline double iou(const Box& a, const Box& b) {
  if (a.w <= 0.0 || a.h <= 0.0 || b.w <= 0.0 || b.h <= 0.0) return 0.0;
  const double ix = std::max(0.0, std::min(a.x2(), b.x2()) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y2(), b.y2()) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

// True when inner sits fully inside outer with at least `slack` margin on
// every side.
inline bool contains(const Box& outer, const Box& inner, double slack) {
  return inner.x >= outer.x + slack && inner.y >= outer.y + slack &&
         inner.x2() <= outer.x2() - slack && inner.y2() <= outer.y2() - slack;
}

}  // namespace vsgg
