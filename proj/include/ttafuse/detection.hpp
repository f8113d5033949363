#pragma once

#include <vector>

#include "ttafuse/box.hpp"

namespace ttafuse {

/// A scored, class-labeled box attached to one image.
struct Detection {
  Box box;
  double score = 0.0;
  int category_id = 0;
  // Index of the view that produced the detection, -1 when unknown.
  int source_view = -1;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Output of weighted boxes fusion: one per cluster of input detections.
struct FusedDetection {
  Box box;
  double score = 0.0;
  int category_id = 0;
  int cluster_size = 1;

  friend bool operator==(const FusedDetection&, const FusedDetection&) = default;
};

/// Throws ValidationError if score is outside [0, 1] or not finite.
void validate(const Detection& d);

/// Strict weak order used everywhere a ranking is needed: score descending,
/// then source_view, then box corners ascending.
bool ranks_before(const Detection& a, const Detection& b);

/// Same ordering for fused output: score descending, then category, box.
bool ranks_before(const FusedDetection& a, const FusedDetection& b);

Detection to_detection(const FusedDetection& f, int source_view = -1);

}  // namespace ttafuse
