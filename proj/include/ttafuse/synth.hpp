#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "ttafuse/eval.hpp"
#include "ttafuse/tta.hpp"

namespace ttafuse {

/// Error model of the stand-in detector. Resolution enters through
/// ref_size / target_size: smaller views miss more objects and localize
/// them worse.
struct NoiseModel {
  int ref_size = 3200;
  // miss_rate = base * (ref_size / target_size)^exponent, clamped to [0, 1].
  double miss_rate_base = 0.2;
  double miss_rate_resolution_exponent = 0.8;
  // Corner noise standard deviation in original-image pixels at ref_size,
  // growing as ref_size / target_size.
  double jitter_px_at_ref = 1.0;
  // Background distractors per image (Poisson). Each one fires in a view
  // with probability fp_view_presence, correlated across views like objects.
  double fp_rate = 4.0;
  double fp_view_presence = 0.5;
  double fp_size_min = 8.0;
  double fp_size_max = 40.0;
  // Kumaraswamy(a, b) score distributions: TP skewed to 1, FP skewed to 0.
  double tp_score_a = 3.0;
  double tp_score_b = 1.0;
  double fp_score_a = 1.0;
  double fp_score_b = 3.0;
  // Correlation of an object's miss / jitter / score noise across views.
  double view_noise_correlation = 0.5;
  // IoU of the detector's own output NMS; must stay below the fusion
  // threshold for single-view fusion to be the identity.
  double output_nms_iou = 0.5;

  double miss_rate(int target_size) const;
  double jitter_px(int target_size) const;
  void validate() const;

  /// miss_rate_base = jitter = fp_rate = 0.
  static NoiseModel noiseless();
};

struct SynthConfig {
  int n_images = 200;
  ImageDims image_size{3840, 2160};
  int objects_min = 1;
  int objects_max = 12;
  double object_size_min = 8.0;
  double object_size_max = 40.0;
  int category_id = 1;
  std::uint64_t rng_seed = 42;
  NoiseModel detector_noise;

  void validate() const;
};

struct SynthDataset {
  std::vector<ImageRecord> images;
  std::vector<GroundTruth> annotations;
};

/// SplitMix64 finalizer; all per-image and per-view streams are seeded by
/// chaining it over (seed, tags...).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);

/// Scene generation. Objects never overlap each other and stay inside the
/// image. Throws ValidationError when placement fails after bounded retries.
SynthDataset generate_dataset(const SynthConfig& cfg);

/// Noisy detections in view coordinates for one image. Deterministic in
/// (seed, image id, view); an object's noise is shared across views to the
/// degree set by view_noise_correlation.
std::vector<Detection> synthetic_detector(const ImageRecord& image, std::span<const GroundTruth> gts,
                                          const ViewSpec& view, const NoiseModel& noise, std::uint64_t seed,
                                          int fp_category_id = 1);

/// DetectorAdapter over a synthetic dataset.
class SyntheticDetector final : public DetectorAdapter {
 public:
  SyntheticDetector(const SynthDataset& dataset, NoiseModel noise, std::uint64_t seed, int fp_category_id = 1);

  std::vector<Detection> detect(const ImageRecord& image, const ViewSpec& view) override;

 private:
  std::map<int, std::vector<GroundTruth>> gts_;
  NoiseModel noise_;
  std::uint64_t seed_;
  int fp_category_id_;
};

}  // namespace ttafuse
