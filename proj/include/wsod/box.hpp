#pragma once

#include <span>

namespace wsod {

// Axis-aligned box in continuous pixel coordinates; area is (x2-x1)*(y2-y1).
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const { return x1 < x2 && y1 < y2; }

  friend bool operator==(const Box&, const Box&) = default;
};

// Intersection over union in [0, 1]; 0 for disjoint boxes.
double iou(const Box& a, const Box& b);

Box flip_horizontal(const Box& b, double image_width);
Box scale_box(const Box& b, double factor);

}  // namespace wsod
