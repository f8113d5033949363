#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "ttafuse/detection.hpp"

namespace ttafuse {

enum class ConfMode {
  none,
  // Multiply fused scores by min(cluster_size, n_views) / n_views.
  scale_by_views,
};

std::string_view to_string(ConfMode mode);
ConfMode conf_mode_from_string(std::string_view s);

struct FusionConfig {
  double iou_thr = 0.55;
  double skip_box_thr = 0.0;
  // One weight per view; empty means every view weighs 1.
  std::vector<double> view_weights;
  ConfMode conf_mode = ConfMode::scale_by_views;

  void validate() const;
};

/// Weighted boxes fusion of detections that share one image and one frame.
///
/// Within each category, detections are scanned in ranking order
/// (score x view weight, descending) and each joins the cluster whose
/// current fused box overlaps it most, provided that IoU exceeds iou_thr;
/// otherwise it starts a new cluster. A cluster's box is the average of its
/// members weighted by weight x score; its score is the weight-averaged
/// member score. Detections from views outside [0, n_views) are rejected
/// when view weights are given; with unit weights source_view only affects
/// tie-breaking.
std::vector<FusedDetection> wbf(std::span<const Detection> detections, int n_views, const FusionConfig& cfg);

/// Greedy per-category non-maximum suppression. Output in emission order.
std::vector<Detection> nms(std::span<const Detection> detections, double iou_thr);

/// Gaussian soft-NMS: overlapping same-category scores decay by
/// exp(-iou^2 / sigma); detections decayed below score_floor are dropped.
std::vector<Detection> soft_nms(std::span<const Detection> detections, double sigma, double score_floor);

}  // namespace ttafuse
