#include "ttafuse/tta.hpp"

#include <algorithm>
#include <set>

#include "ttafuse/errors.hpp"

namespace ttafuse {

std::string to_string(const ViewSpec& v) {
  return std::to_string(v.target_size) + (v.hflip ? "/hflip" : "/noflip");
}

ViewPlan::ViewPlan(std::vector<ViewSpec> views) : views_(std::move(views)) {
  if (views_.empty()) {
    throw ValidationError("view plan must contain at least one view");
  }
  std::set<ViewSpec> seen;
  for (const ViewSpec& v : views_) {
    if (v.target_size < kMinTargetSize) {
      throw ValidationError("view target_size must be >= " + std::to_string(kMinTargetSize) + ", got " +
                            std::to_string(v.target_size));
    }
    if (!seen.insert(v).second) {
      throw ValidationError("duplicate view " + to_string(v) + " in plan");
    }
  }
}

ViewPlan make_view_plan(std::span<const int> sizes, bool with_flip) {
  std::vector<ViewSpec> views;
  for (int size : sizes) {
    views.push_back({size, false});
    if (with_flip) views.push_back({size, true});
  }
  return ViewPlan(std::move(views));
}

ViewPlan default_view_plan() {
  static constexpr int kSizes[] = {3200, 3360, 3520};
  return make_view_plan(kSizes, true);
}

Letterbox Letterbox::compute(const ImageDims& dims, int target_size) {
  const double target = target_size;
  const double longest = std::max(dims.width(), dims.height());
  Letterbox lb;
  lb.scale = target / longest;
  lb.pad_x = (target - dims.width() * lb.scale) / 2.0;
  lb.pad_y = (target - dims.height() * lb.scale) / 2.0;
  return lb;
}

Box original_to_view(const Box& b, const ViewSpec& view, const ImageDims& dims) {
  const Letterbox lb = Letterbox::compute(dims, view.target_size);
  const Box resized = scale(b, lb.scale, lb.scale);
  const Box padded(resized.x1() + lb.pad_x, resized.y1() + lb.pad_y, resized.x2() + lb.pad_x, resized.y2() + lb.pad_y);
  return view.hflip ? flip_h(padded, view.target_size) : padded;
}

std::optional<Detection> view_to_original(const Detection& d, const ViewSpec& view, const ImageDims& dims) {
  const Letterbox lb = Letterbox::compute(dims, view.target_size);
  const Box unflipped = view.hflip ? flip_h(d.box, view.target_size) : d.box;
  const Box unpadded(unflipped.x1() - lb.pad_x, unflipped.y1() - lb.pad_y, unflipped.x2() - lb.pad_x,
                     unflipped.y2() - lb.pad_y);
  const Box original = scale(unpadded, 1.0 / lb.scale, 1.0 / lb.scale);
  if (original.x2() <= 0.0 || original.y2() <= 0.0 || original.x1() >= dims.width() ||
      original.y1() >= dims.height()) {
    return std::nullopt;
  }
  Detection out = d;
  out.box = clamp_to_image(original, dims);
  return out;
}

TtaResult run_tta(const ImageRecord& image, const ViewPlan& plan, DetectorAdapter& detector, const FusionConfig& cfg,
                  const TtaOptions& options) {
  cfg.validate();
  if (!cfg.view_weights.empty() && cfg.view_weights.size() != plan.size()) {
    throw ValidationError("view_weights has " + std::to_string(cfg.view_weights.size()) + " entries but the plan has " +
                          std::to_string(plan.size()) + " views");
  }

  TtaResult result;
  result.raw_per_view.resize(plan.size());
  FusionConfig effective = cfg;
  effective.view_weights.clear();
  int n_ok = 0;
  for (std::size_t v = 0; v < plan.size(); ++v) {
    const ViewSpec& view = plan[v];
    std::vector<Detection> raw;
    try {
      raw = detector.detect(image, view);
      for (const Detection& d : raw) validate(d);
    } catch (const std::exception& e) {
      if (!options.lenient) {
        throw DetectorError("detector failed on image " + std::to_string(image.image_id) + " view " +
                            std::to_string(v) + " (" + to_string(view) + "): " + e.what());
      }
      ++result.stats.failed_views;
      continue;
    }
    // Successful views are renumbered densely so wbf sees n_views = n_ok.
    const int index = n_ok++;
    if (!cfg.view_weights.empty()) effective.view_weights.push_back(cfg.view_weights[v]);
    result.raw_per_view[v] = raw;
    for (const Detection& d : raw) {
      ++result.stats.detections_in;
      auto mapped = view_to_original(d, view, image.dims);
      if (!mapped) {
        ++result.stats.dropped_in_padding;
        continue;
      }
      mapped->source_view = index;
      result.mapped.push_back(*mapped);
    }
  }
  if (n_ok == 0) {
    throw DetectorError("detector failed on every view of image " + std::to_string(image.image_id));
  }
  result.detections = wbf(result.mapped, n_ok, effective);
  return result;
}

}  // namespace ttafuse
