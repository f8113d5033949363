#pragma once

#include <compare>
#include <iosfwd>

namespace ttafuse {

/// Width and height of an image in pixels. Both are at least 1.
class ImageDims {
 public:
  ImageDims(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }

  friend bool operator==(const ImageDims&, const ImageDims&) = default;

 private:
  int width_;
  int height_;
};

/// Axis-aligned box in continuous pixel coordinates, top-left origin.
///
/// The width of a box is x2 - x1; a pixel-indexed box covering columns
/// [a, b] inclusive is [a, ., b + 1, .] here. Construction rejects
/// non-finite coordinates and inverted corners instead of swapping them.
class Box {
 public:
  Box() = default;
  Box(double x1, double y1, double x2, double y2);

  double x1() const { return x1_; }
  double y1() const { return y1_; }
  double x2() const { return x2_; }
  double y2() const { return y2_; }
  double width() const { return x2_ - x1_; }
  double height() const { return y2_ - y1_; }

  friend bool operator==(const Box&, const Box&) = default;
  // Lexicographic (x1, y1, x2, y2); used as the deterministic tie-break key.
  friend auto operator<=>(const Box&, const Box&) = default;

 private:
  double x1_ = 0.0;
  double y1_ = 0.0;
  double x2_ = 0.0;
  double y2_ = 0.0;
};

std::ostream& operator<<(std::ostream& os, const Box& b);

double area(const Box& b);

/// Intersection over union. Two boxes with zero union area have IoU 0.
double iou(const Box& a, const Box& b);

/// Mirror about the vertical axis x = width / 2.
Box flip_h(const Box& b, double width);
Box flip_h(const Box& b, const ImageDims& dims);

/// Multiply x coordinates by sx and y coordinates by sy. Throws
/// ValidationError unless both factors are positive and finite.
Box scale(const Box& b, double sx, double sy);

/// Clip into [0, width] x [0, height]. Boxes fully outside collapse onto the
/// nearest border with zero area.
Box clamp_to_image(const Box& b, const ImageDims& dims);

}  // namespace ttafuse
