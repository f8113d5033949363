#include "ttafuse/box.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "ttafuse/errors.hpp"

namespace ttafuse {

ImageDims::ImageDims(int width, int height) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw ValidationError("image dimensions must be positive, got " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
}

Box::Box(double x1, double y1, double x2, double y2) : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
  if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) || !std::isfinite(y2)) {
    throw ValidationError("box coordinates must be finite");
  }
  if (x2 < x1 || y2 < y1) {
    throw ValidationError("box corners are inverted: [" + std::to_string(x1) + ", " + std::to_string(y1) + ", " +
                          std::to_string(x2) + ", " + std::to_string(y2) + "]");
  }
}

std::ostream& operator<<(std::ostream& os, const Box& b) {
  return os << '[' << b.x1() << ", " << b.y1() << ", " << b.x2() << ", " << b.y2() << ']';
}

double area(const Box& b) { return b.width() * b.height(); }

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (iw <= 0.0 || ih <= 0.0) {
    return 0.0;
  }
  const double inter = iw * ih;
  const double uni = area(a) + area(b) - inter;
  if (uni <= 0.0) {
    return 0.0;
  }
  return std::clamp(inter / uni, 0.0, 1.0);
}

Box flip_h(const Box& b, double width) { return Box(width - b.x2(), b.y1(), width - b.x1(), b.y2()); }

Box flip_h(const Box& b, const ImageDims& dims) { return flip_h(b, static_cast<double>(dims.width())); }

Box scale(const Box& b, double sx, double sy) {
  if (!(sx > 0.0) || !(sy > 0.0) || !std::isfinite(sx) || !std::isfinite(sy)) {
    throw ValidationError("scale factors must be positive and finite");
  }
  return Box(b.x1() * sx, b.y1() * sy, b.x2() * sx, b.y2() * sy);
}

Box clamp_to_image(const Box& b, const ImageDims& dims) {
  const double w = dims.width();
  const double h = dims.height();
  return Box(std::clamp(b.x1(), 0.0, w), std::clamp(b.y1(), 0.0, h), std::clamp(b.x2(), 0.0, w),
             std::clamp(b.y2(), 0.0, h));
}

}  // namespace ttafuse
