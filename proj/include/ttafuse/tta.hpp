#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ttafuse/box.hpp"
#include "ttafuse/detection.hpp"
#include "ttafuse/fusion.hpp"

namespace ttafuse {

inline constexpr int kMinTargetSize = 32;

/// One augmented inference configuration: a square input resolution and an
/// optional horizontal flip.
struct ViewSpec {
  int target_size = 3200;
  bool hflip = false;

  friend bool operator==(const ViewSpec&, const ViewSpec&) = default;
  friend auto operator<=>(const ViewSpec&, const ViewSpec&) = default;
};

std::string to_string(const ViewSpec& v);

/// Ordered, non-empty list of distinct views.
class ViewPlan {
 public:
  explicit ViewPlan(std::vector<ViewSpec> views);

  const std::vector<ViewSpec>& views() const { return views_; }
  std::size_t size() const { return views_.size(); }
  const ViewSpec& operator[](std::size_t i) const { return views_[i]; }

  friend bool operator==(const ViewPlan&, const ViewPlan&) = default;

 private:
  std::vector<ViewSpec> views_;
};

/// sizes x flips, ordered by size (as given) and no-flip before flip.
ViewPlan make_view_plan(std::span<const int> sizes, bool with_flip);

/// {3200, 3360, 3520} x {no flip, flip}.
ViewPlan default_view_plan();

struct ImageRecord {
  int image_id = 0;
  ImageDims dims{1, 1};
  std::string file_name;
};

/// Aspect-preserving resize into a target_size square with symmetric
/// padding. Parameters are real-valued so that the inverse map is exact up
/// to rounding.
struct Letterbox {
  double scale = 1.0;
  double pad_x = 0.0;
  double pad_y = 0.0;

  static Letterbox compute(const ImageDims& dims, int target_size);
};

/// Original image frame to view frame (resize, pad, then flip in the view).
Box original_to_view(const Box& b, const ViewSpec& view, const ImageDims& dims);

/// Inverse of original_to_view followed by clamping to the image. Returns
/// nullopt when the detection lies entirely in the padding.
std::optional<Detection> view_to_original(const Detection& d, const ViewSpec& view, const ImageDims& dims);

/// Anything that can produce detections for one image under one view.
/// Boxes are returned in view coordinates (the target_size square frame).
class DetectorAdapter {
 public:
  virtual ~DetectorAdapter() = default;
  virtual std::vector<Detection> detect(const ImageRecord& image, const ViewSpec& view) = 0;
};

struct TtaOptions {
  // Fuse the views that succeeded instead of aborting the image.
  bool lenient = false;
};

struct TtaStats {
  int detections_in = 0;
  int dropped_in_padding = 0;
  int failed_views = 0;
};

struct TtaResult {
  std::vector<FusedDetection> detections;
  // Detector output per plan view, in view coordinates (empty for failed views).
  std::vector<std::vector<Detection>> raw_per_view;
  // Per-view detections in the original frame, tagged with source_view.
  std::vector<Detection> mapped;
  TtaStats stats;
};

/// Detect on every view, map results back to the original frame and fuse
/// them with wbf over n_views = number of (successful) views.
TtaResult run_tta(const ImageRecord& image, const ViewPlan& plan, DetectorAdapter& detector, const FusionConfig& cfg,
                  const TtaOptions& options = {});

}  // namespace ttafuse
