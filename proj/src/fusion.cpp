#include "ttafuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "ttafuse/errors.hpp"

namespace ttafuse {

void validate(const Detection& d) {
  if (!std::isfinite(d.score) || d.score < 0.0 || d.score > 1.0) {
    throw ValidationError("detection score must lie in [0, 1], got " + std::to_string(d.score));
  }
}

bool ranks_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.source_view != b.source_view) return a.source_view < b.source_view;
  if (a.box != b.box) return a.box < b.box;
  return a.category_id < b.category_id;
}

bool ranks_before(const FusedDetection& a, const FusedDetection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.category_id != b.category_id) return a.category_id < b.category_id;
  if (a.box != b.box) return a.box < b.box;
  return a.cluster_size < b.cluster_size;
}

Detection to_detection(const FusedDetection& f, int source_view) {
  return Detection{f.box, f.score, f.category_id, source_view};
}

std::string_view to_string(ConfMode mode) {
  switch (mode) {
    case ConfMode::none:
      return "none";
    case ConfMode::scale_by_views:
      return "scale_by_views";
  }
  return "none";
}

ConfMode conf_mode_from_string(std::string_view s) {
  if (s == "none") return ConfMode::none;
  if (s == "scale_by_views") return ConfMode::scale_by_views;
  throw ValidationError("unknown conf_mode '" + std::string(s) + "' (expected none or scale_by_views)");
}

void FusionConfig::validate() const {
  if (!(iou_thr > 0.0 && iou_thr < 1.0)) {
    throw ValidationError("iou_thr must lie in (0, 1)");
  }
  if (!(skip_box_thr >= 0.0 && skip_box_thr <= 1.0)) {
    throw ValidationError("skip_box_thr must lie in [0, 1]");
  }
  for (double w : view_weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw ValidationError("view weights must be positive and finite");
    }
  }
}

namespace {

struct Weighted {
  const Detection* det;
  double weight;
  double effective;  // score * weight
};

bool weighted_before(const Weighted& a, const Weighted& b) {
  if (a.effective != b.effective) return a.effective > b.effective;
  if (a.det->source_view != b.det->source_view) return a.det->source_view < b.det->source_view;
  if (a.det->box != b.det->box) return a.det->box < b.det->box;
  return a.det->score > b.det->score;
}

struct Cluster {
  std::vector<const Weighted*> members;
  Box fused;
  double score = 0.0;

  void add(const Weighted& w) {
    members.push_back(&w);
    if (members.size() == 1) {
      fused = w.det->box;
      score = w.det->score;
      return;
    }
    double sx1 = 0.0, sy1 = 0.0, sx2 = 0.0, sy2 = 0.0;
    double sum_ws = 0.0, sum_w = 0.0;
    for (const Weighted* m : members) {
      sum_ws += m->effective;
      sum_w += m->weight;
    }
    // All-zero scores leave only the view weights to average by.
    const bool by_weight = sum_ws <= 0.0;
    const double norm = by_weight ? sum_w : sum_ws;
    double lo[4], hi[4];
    std::fill(std::begin(lo), std::end(lo), std::numeric_limits<double>::infinity());
    std::fill(std::begin(hi), std::end(hi), -std::numeric_limits<double>::infinity());
    for (const Weighted* m : members) {
      const double c = by_weight ? m->weight : m->effective;
      const Box& b = m->det->box;
      const double v[4] = {b.x1(), b.y1(), b.x2(), b.y2()};
      sx1 += c * v[0];
      sy1 += c * v[1];
      sx2 += c * v[2];
      sy2 += c * v[3];
      for (int k = 0; k < 4; ++k) {
        lo[k] = std::min(lo[k], v[k]);
        hi[k] = std::max(hi[k], v[k]);
      }
    }
    // Clamping keeps the average inside the members' hull despite rounding.
    const double x1 = std::clamp(sx1 / norm, lo[0], hi[0]);
    const double y1 = std::clamp(sy1 / norm, lo[1], hi[1]);
    const double x2 = std::clamp(sx2 / norm, lo[2], hi[2]);
    const double y2 = std::clamp(sy2 / norm, lo[3], hi[3]);
    fused = Box(x1, y1, std::max(x1, x2), std::max(y1, y2));
    score = sum_ws / sum_w;
  }
};

}  // namespace

std::vector<FusedDetection> wbf(std::span<const Detection> detections, int n_views, const FusionConfig& cfg) {
  if (n_views < 1) {
    throw ValidationError("wbf needs n_views >= 1");
  }
  cfg.validate();
  const bool weighted = !cfg.view_weights.empty();
  if (weighted && cfg.view_weights.size() != static_cast<std::size_t>(n_views)) {
    throw ValidationError("view_weights has " + std::to_string(cfg.view_weights.size()) + " entries but n_views is " +
                          std::to_string(n_views));
  }

  std::map<int, std::vector<Weighted>> by_category;
  for (const Detection& d : detections) {
    validate(d);
    if (d.score < cfg.skip_box_thr) continue;
    double w = 1.0;
    if (weighted) {
      if (d.source_view < 0 || d.source_view >= n_views) {
        throw ValidationError("detection source_view " + std::to_string(d.source_view) +
                              " has no weight (n_views = " + std::to_string(n_views) + ")");
      }
      w = cfg.view_weights[static_cast<std::size_t>(d.source_view)];
    }
    by_category[d.category_id].push_back(Weighted{&d, w, d.score * w});
  }

  std::vector<FusedDetection> out;
  for (auto& [category, items] : by_category) {
    std::sort(items.begin(), items.end(), weighted_before);
    std::vector<Cluster> clusters;
    for (const Weighted& item : items) {
      int best = -1;
      double best_iou = cfg.iou_thr;
      for (std::size_t c = 0; c < clusters.size(); ++c) {
        const double overlap = iou(item.det->box, clusters[c].fused);
        // Strict comparison keeps the earliest cluster on ties.
        if (overlap > best_iou) {
          best_iou = overlap;
          best = static_cast<int>(c);
        }
      }
      if (best < 0) {
        clusters.emplace_back();
        best = static_cast<int>(clusters.size()) - 1;
      }
      clusters[static_cast<std::size_t>(best)].add(item);
    }
    for (const Cluster& c : clusters) {
      const int size = static_cast<int>(c.members.size());
      double score = c.score;
      if (cfg.conf_mode == ConfMode::scale_by_views) {
        score *= static_cast<double>(std::min(size, n_views)) / n_views;
      }
      out.push_back(FusedDetection{c.fused, std::clamp(score, 0.0, 1.0), category, size});
    }
  }
  std::sort(out.begin(), out.end(), [](const FusedDetection& a, const FusedDetection& b) { return ranks_before(a, b); });
  return out;
}

std::vector<Detection> nms(std::span<const Detection> detections, double iou_thr) {
  if (!(iou_thr > 0.0 && iou_thr < 1.0)) {
    throw ValidationError("nms iou_thr must lie in (0, 1)");
  }
  std::vector<Detection> order(detections.begin(), detections.end());
  for (const Detection& d : order) validate(d);
  std::sort(order.begin(), order.end(), [](const Detection& a, const Detection& b) { return ranks_before(a, b); });

  std::vector<bool> suppressed(order.size(), false);
  std::vector<Detection> kept;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (suppressed[i]) continue;
    kept.push_back(order[i]);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      if (!suppressed[j] && order[j].category_id == order[i].category_id && iou(order[i].box, order[j].box) > iou_thr) {
        suppressed[j] = true;
      }
    }
  }
  return kept;
}

std::vector<Detection> soft_nms(std::span<const Detection> detections, double sigma, double score_floor) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ValidationError("soft_nms sigma must be positive");
  }
  if (!(score_floor >= 0.0 && score_floor < 1.0)) {
    throw ValidationError("soft_nms score_floor must lie in [0, 1)");
  }
  std::vector<Detection> remaining(detections.begin(), detections.end());
  for (const Detection& d : remaining) validate(d);

  std::vector<Detection> kept;
  while (!remaining.empty()) {
    auto top = std::min_element(remaining.begin(), remaining.end(),
                                [](const Detection& a, const Detection& b) { return ranks_before(a, b); });
    const Detection selected = *top;
    remaining.erase(top);
    kept.push_back(selected);

    std::vector<Detection> next;
    next.reserve(remaining.size());
    for (Detection& d : remaining) {
      if (d.category_id == selected.category_id) {
        const double overlap = iou(selected.box, d.box);
        d.score *= std::exp(-(overlap * overlap) / sigma);
        if (d.score < score_floor) continue;
      }
      next.push_back(d);
    }
    remaining = std::move(next);
  }
  return kept;
}

}  // namespace ttafuse
