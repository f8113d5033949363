#include "ttafuse/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>

#include "ttafuse/errors.hpp"
#include "ttafuse/fusion.hpp"

namespace ttafuse {

namespace {

constexpr std::uint64_t kTagCommon = 0xC0FFEE;
constexpr std::uint64_t kTagFalsePositive = 0xFA15E;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Inverse CDF of the Kumaraswamy(a, b) distribution on [0, 1].
double kumaraswamy_quantile(double u, double a, double b) {
  return std::pow(1.0 - std::pow(1.0 - u, 1.0 / b), 1.0 / a);
}

std::uint64_t view_key(const ViewSpec& v) {
  return (static_cast<std::uint64_t>(v.target_size) << 1) | (v.hflip ? 1u : 0u);
}

bool overlaps(const Box& a, const Box& b) {
  return std::min(a.x2(), b.x2()) > std::max(a.x1(), b.x1()) && std::min(a.y2(), b.y2()) > std::max(a.y1(), b.y1());
}

Box random_box(std::mt19937_64& rng, const ImageDims& dims, double size_min, double size_max) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> log_aspect(-0.3, 0.3);
  // Squared uniform biases sizes toward the small end of the range.
  const double u = unit(rng);
  const double side = size_min + (size_max - size_min) * u * u;
  const double aspect = std::exp(log_aspect(rng));
  const double w = std::min(side * std::sqrt(aspect), static_cast<double>(dims.width()));
  const double h = std::min(side / std::sqrt(aspect), static_cast<double>(dims.height()));
  const double x = std::uniform_real_distribution<double>(0.0, dims.width() - w)(rng);
  const double y = std::uniform_real_distribution<double>(0.0, dims.height() - h)(rng);
  return Box(x, y, x + w, y + h);
}

}  // namespace

double NoiseModel::miss_rate(int target_size) const {
  const double ratio = static_cast<double>(ref_size) / target_size;
  return std::clamp(miss_rate_base * std::pow(ratio, miss_rate_resolution_exponent), 0.0, 1.0);
}

double NoiseModel::jitter_px(int target_size) const {
  return jitter_px_at_ref * static_cast<double>(ref_size) / target_size;
}

void NoiseModel::validate() const {
  if (ref_size < kMinTargetSize) throw ValidationError("noise ref_size must be >= 32");
  if (!(miss_rate_base >= 0.0 && miss_rate_base <= 1.0)) throw ValidationError("miss_rate_base must lie in [0, 1]");
  if (!(miss_rate_resolution_exponent >= 0.0)) throw ValidationError("miss_rate_resolution_exponent must be >= 0");
  if (!(jitter_px_at_ref >= 0.0)) throw ValidationError("jitter_px_at_ref must be >= 0");
  if (!(fp_rate >= 0.0)) throw ValidationError("fp_rate must be >= 0");
  if (!(fp_view_presence >= 0.0 && fp_view_presence <= 1.0)) throw ValidationError("fp_view_presence must lie in [0, 1]");
  if (!(fp_size_min > 0.0 && fp_size_min <= fp_size_max)) throw ValidationError("fp size range is empty");
  if (!(tp_score_a > 0.0 && tp_score_b > 0.0 && fp_score_a > 0.0 && fp_score_b > 0.0)) {
    throw ValidationError("score distribution parameters must be positive");
  }
  if (!(view_noise_correlation >= 0.0 && view_noise_correlation <= 1.0)) {
    throw ValidationError("view_noise_correlation must lie in [0, 1]");
  }
  if (!(output_nms_iou > 0.0 && output_nms_iou < 1.0)) throw ValidationError("output_nms_iou must lie in (0, 1)");
}

NoiseModel NoiseModel::noiseless() {
  NoiseModel n;
  n.miss_rate_base = 0.0;
  n.jitter_px_at_ref = 0.0;
  n.fp_rate = 0.0;
  return n;
}

void SynthConfig::validate() const {
  if (n_images < 1) throw ValidationError("n_images must be >= 1");
  if (objects_min < 0 || objects_min > objects_max) throw ValidationError("objects_per_image range is empty");
  if (!(object_size_min > 0.0 && object_size_min <= object_size_max)) {
    throw ValidationError("object_size_px range is empty");
  }
  detector_noise.validate();
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

SynthDataset generate_dataset(const SynthConfig& cfg) {
  cfg.validate();
  constexpr int kPlacementRetries = 1000;
  SynthDataset out;
  for (int i = 0; i < cfg.n_images; ++i) {
    const int image_id = i + 1;
    std::mt19937_64 rng(mix_seed(cfg.rng_seed, static_cast<std::uint64_t>(i)));
    char name[32];
    std::snprintf(name, sizeof(name), "synth_%06d.png", image_id);
    out.images.push_back(ImageRecord{image_id, cfg.image_size, name});

    const int n_objects = std::uniform_int_distribution<int>(cfg.objects_min, cfg.objects_max)(rng);
    std::vector<Box> placed;
    for (int k = 0; k < n_objects; ++k) {
      bool ok = false;
      for (int attempt = 0; attempt < kPlacementRetries && !ok; ++attempt) {
        const Box candidate = random_box(rng, cfg.image_size, cfg.object_size_min, cfg.object_size_max);
        ok = std::none_of(placed.begin(), placed.end(), [&](const Box& b) { return overlaps(b, candidate); });
        if (ok) placed.push_back(candidate);
      }
      if (!ok) {
        throw ValidationError("could not place object " + std::to_string(k) + " in image " + std::to_string(image_id) +
                              " without overlap after " + std::to_string(kPlacementRetries) + " attempts");
      }
    }
    for (const Box& b : placed) {
      out.annotations.push_back(GroundTruth{image_id, b, cfg.category_id, false});
    }
  }
  return out;
}

std::vector<Detection> synthetic_detector(const ImageRecord& image, std::span<const GroundTruth> gts,
                                          const ViewSpec& view, const NoiseModel& noise, std::uint64_t seed,
                                          int fp_category_id) {
  noise.validate();
  const auto image_seed = mix_seed(seed, static_cast<std::uint64_t>(image.image_id));
  const double rho = noise.view_noise_correlation;
  const double shared = std::sqrt(rho);
  const double own = std::sqrt(1.0 - rho);
  const double miss_rate = noise.miss_rate(view.target_size);
  const double sigma = noise.jitter_px(view.target_size);
  const ImageDims& dims = image.dims;

  std::vector<Detection> out;
  for (std::size_t j = 0; j < gts.size(); ++j) {
    const auto object_seed = mix_seed(image_seed, j);
    std::mt19937_64 common(mix_seed(object_seed, kTagCommon));
    std::mt19937_64 local(mix_seed(object_seed, view_key(view)));
    std::normal_distribution<double> gauss;
    // Components: miss, x1, y1, x2, y2, score.
    std::array<double, 6> z{};
    for (double& v : z) v = shared * gauss(common);
    gauss.reset();
    for (double& v : z) v += own * gauss(local);

    if (miss_rate >= 1.0 || normal_cdf(z[0]) < miss_rate) continue;
    const Box& g = gts[j].box;
    const double x1 = g.x1() + sigma * z[1];
    const double y1 = g.y1() + sigma * z[2];
    const double x2 = g.x2() + sigma * z[3];
    const double y2 = g.y2() + sigma * z[4];
    const Box jittered = clamp_to_image(Box(std::min(x1, x2), std::min(y1, y2), std::max(x1, x2), std::max(y1, y2)), dims);
    const double score = kumaraswamy_quantile(normal_cdf(z[5]), noise.tp_score_a, noise.tp_score_b);
    out.push_back(Detection{original_to_view(jittered, view, dims), std::clamp(score, 0.0, 1.0), gts[j].category_id, -1});
  }

  // Distractors are drawn per image and shared by every view.
  std::mt19937_64 scene(mix_seed(image_seed, kTagFalsePositive));
  const int n_fp = noise.fp_rate > 0.0 ? std::poisson_distribution<int>(noise.fp_rate)(scene) : 0;
  for (int k = 0; k < n_fp; ++k) {
    const Box b = random_box(scene, dims, noise.fp_size_min, noise.fp_size_max);
    const auto fp_seed = mix_seed(mix_seed(image_seed, kTagFalsePositive), static_cast<std::uint64_t>(k));
    std::mt19937_64 common(mix_seed(fp_seed, kTagCommon));
    std::mt19937_64 local(mix_seed(fp_seed, view_key(view)));
    std::normal_distribution<double> gauss;
    std::array<double, 2> z{};  // presence, score
    for (double& v : z) v = shared * gauss(common);
    gauss.reset();
    for (double& v : z) v += own * gauss(local);
    if (normal_cdf(z[0]) >= noise.fp_view_presence) continue;
    const double score = kumaraswamy_quantile(normal_cdf(z[1]), noise.fp_score_a, noise.fp_score_b);
    out.push_back(Detection{original_to_view(b, view, dims), std::clamp(score, 0.0, 1.0), fp_category_id, -1});
  }
  return nms(out, noise.output_nms_iou);
}

SyntheticDetector::SyntheticDetector(const SynthDataset& dataset, NoiseModel noise, std::uint64_t seed,
                                     int fp_category_id)
    : noise_(noise), seed_(seed), fp_category_id_(fp_category_id) {
  noise_.validate();
  for (const ImageRecord& im : dataset.images) gts_[im.image_id];
  for (const GroundTruth& g : dataset.annotations) gts_[g.image_id].push_back(g);
}

std::vector<Detection> SyntheticDetector::detect(const ImageRecord& image, const ViewSpec& view) {
  const auto it = gts_.find(image.image_id);
  if (it == gts_.end()) {
    throw DetectorError("synthetic detector has no scene for image " + std::to_string(image.image_id));
  }
  return synthetic_detector(image, it->second, view, noise_, seed_, fp_category_id_);
}

}  // namespace ttafuse
