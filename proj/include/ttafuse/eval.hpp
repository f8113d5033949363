#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ttafuse/box.hpp"
#include "ttafuse/detection.hpp"

namespace ttafuse {

struct GroundTruth {
  int image_id = 0;
  Box box;
  int category_id = 0;
  // Crowd / ignore region: never a false negative, and predictions matched
  // to it are not scored.
  bool ignore = false;
};

/// A prediction with its image, as stored in a detection file.
struct ImageDetection {
  int image_id = 0;
  Detection det;
};

enum class MatchLabel { tp, fp, ignored };

/// Greedy matching for one image and one category. Returns one label per
/// prediction, in the order of `preds`.
std::vector<MatchLabel> match_detections(std::span<const Detection> preds, std::span<const GroundTruth> gts,
                                         double iou_thr);

/// A scored TP/FP outcome, carrying what the global ranking needs.
struct ScoredLabel {
  double score = 0.0;
  bool tp = false;
  int image_id = 0;
  Box box;
};

inline constexpr int kRecallPoints = 101;

struct PrCurve {
  // Interpolated precision at recall thresholds 0.00, 0.01, ..., 1.00.
  std::array<double, kRecallPoints> precision{};
  std::array<double, kRecallPoints> recall{};
  double ap = 0.0;
};

/// 101-point interpolated AP. Throws UndefinedMetricError when n_gt < 1.
double average_precision(std::span<const ScoredLabel> labels, int n_gt);
PrCurve precision_recall(std::span<const ScoredLabel> labels, int n_gt);

enum class SizeBucket { small, medium, large };
inline constexpr std::array<SizeBucket, 3> kSizeBuckets = {SizeBucket::small, SizeBucket::medium, SizeBucket::large};
std::string to_string(SizeBucket b);
SizeBucket size_bucket(double area);

struct EvalOptions {
  double iou_thr = 0.5;
  // Keep only the top-k predictions per image; 0 means unlimited.
  int max_dets_per_image = 0;
};

struct MatchCounts {
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

struct EvalReport {
  double iou_thr = 0.5;
  double ap = 0.0;
  PrCurve curve;  // pooled over categories
  std::map<int, double> per_category;
  // Absent when no ground truth falls in the bucket.
  std::map<SizeBucket, std::optional<double>> per_bucket;
  MatchCounts counts;
  int n_gt = 0;
  int n_predictions = 0;
};

/// Dataset-level AP at one IoU threshold: mean over categories that have
/// non-ignored ground truth, plus COCO-style size buckets (area < 32^2,
/// < 96^2, else). Throws UndefinedMetricError for an empty GT set.
EvalReport evaluate(std::span<const ImageDetection> preds, std::span<const GroundTruth> gts,
                    const EvalOptions& options = {});

}  // namespace ttafuse
