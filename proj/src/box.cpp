#include "wsod/box.hpp"

#include <algorithm>

namespace wsod {

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

Box flip_horizontal(const Box& b, double image_width) {
  return {image_width - b.x2, b.y1, image_width - b.x1, b.y2};
}

Box scale_box(const Box& b, double factor) {
  return {b.x1 * factor, b.y1 * factor, b.x2 * factor, b.y2 * factor};
}

}  // namespace wsod
