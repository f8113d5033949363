#include "ttafuse/eval.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>

#include "ttafuse/errors.hpp"

namespace ttafuse {

namespace {

constexpr double kSmallMax = 32.0 * 32.0;
constexpr double kMediumMax = 96.0 * 96.0;

struct AreaRange {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  bool contains(double a) const { return a >= lo && a < hi; }
};

AreaRange range_of(SizeBucket b) {
  switch (b) {
    case SizeBucket::small:
      return {0.0, kSmallMax};
    case SizeBucket::medium:
      return {kSmallMax, kMediumMax};
    case SizeBucket::large:
      return {kMediumMax, std::numeric_limits<double>::infinity()};
  }
  return {};
}

bool gt_before(const GroundTruth& a, const GroundTruth& b) {
  if (a.box != b.box) return a.box < b.box;
  return a.ignore < b.ignore;
}

// Core greedy matcher. `preds` must already be in ranking order. Ground
// truth outside `range` behaves as ignore; unmatched predictions outside it
// are not scored.
std::vector<MatchLabel> match_sorted(std::span<const Detection* const> preds, std::span<const GroundTruth> gts,
                                     double iou_thr, const AreaRange& range) {
  std::vector<const GroundTruth*> order;
  order.reserve(gts.size());
  for (const GroundTruth& g : gts) order.push_back(&g);
  std::stable_sort(order.begin(), order.end(), [](const GroundTruth* a, const GroundTruth* b) { return gt_before(*a, *b); });

  std::vector<bool> ignored(order.size());
  for (std::size_t g = 0; g < order.size(); ++g) {
    ignored[g] = order[g]->ignore || !range.contains(area(order[g]->box));
  }
  std::vector<bool> used(order.size(), false);
  std::vector<MatchLabel> labels;
  labels.reserve(preds.size());
  for (const Detection* p : preds) {
    int best = -1;
    double best_iou = -1.0;
    int best_ignore = -1;
    double best_ignore_iou = -1.0;
    for (std::size_t g = 0; g < order.size(); ++g) {
      const double overlap = iou(p->box, order[g]->box);
      if (overlap < iou_thr) continue;
      if (ignored[g]) {
        if (overlap > best_ignore_iou) {
          best_ignore_iou = overlap;
          best_ignore = static_cast<int>(g);
        }
      } else if (!used[g] && overlap > best_iou) {
        best_iou = overlap;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = true;
      labels.push_back(MatchLabel::tp);
    } else if (best_ignore >= 0 || !range.contains(area(p->box))) {
      labels.push_back(MatchLabel::ignored);
    } else {
      labels.push_back(MatchLabel::fp);
    }
  }
  return labels;
}

bool label_before(const ScoredLabel& a, const ScoredLabel& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.image_id != b.image_id) return a.image_id < b.image_id;
  if (a.box != b.box) return a.box < b.box;
  return a.tp < b.tp;
}

}  // namespace

std::vector<MatchLabel> match_detections(std::span<const Detection> preds, std::span<const GroundTruth> gts,
                                         double iou_thr) {
  if (!(iou_thr > 0.0 && iou_thr <= 1.0)) {
    throw ValidationError("matching iou_thr must lie in (0, 1]");
  }
  std::vector<std::size_t> idx(preds.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return ranks_before(preds[a], preds[b]); });
  std::vector<const Detection*> sorted;
  sorted.reserve(idx.size());
  for (std::size_t i : idx) sorted.push_back(&preds[i]);

  const std::vector<MatchLabel> ranked = match_sorted(sorted, gts, iou_thr, AreaRange{});
  std::vector<MatchLabel> out(preds.size());
  for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = ranked[k];
  return out;
}

PrCurve precision_recall(std::span<const ScoredLabel> labels, int n_gt) {
  if (n_gt < 1) {
    throw UndefinedMetricError("average precision is undefined without ground truth");
  }
  std::vector<ScoredLabel> sorted(labels.begin(), labels.end());
  std::sort(sorted.begin(), sorted.end(), label_before);

  // tp counts and precision after each ranked prediction.
  std::vector<long long> tp_at(sorted.size());
  std::vector<double> precision(sorted.size());
  long long tp = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i].tp) ++tp;
    tp_at[i] = tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  for (std::size_t i = sorted.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }

  PrCurve curve;
  double sum = 0.0;
  std::size_t pos = 0;
  for (int r = 0; r < kRecallPoints; ++r) {
    curve.recall[static_cast<std::size_t>(r)] = r / 100.0;
    // First prediction whose recall reaches r/100, compared in integers.
    while (pos < sorted.size() && tp_at[pos] * 100 < static_cast<long long>(r) * n_gt) ++pos;
    const double p = pos < sorted.size() ? precision[pos] : 0.0;
    curve.precision[static_cast<std::size_t>(r)] = p;
    sum += p;
  }
  curve.ap = sum / kRecallPoints;
  return curve;
}

double average_precision(std::span<const ScoredLabel> labels, int n_gt) { return precision_recall(labels, n_gt).ap; }

std::string to_string(SizeBucket b) {
  switch (b) {
    case SizeBucket::small:
      return "small";
    case SizeBucket::medium:
      return "medium";
    case SizeBucket::large:
      return "large";
  }
  return "small";
}

SizeBucket size_bucket(double a) {
  if (a < kSmallMax) return SizeBucket::small;
  if (a < kMediumMax) return SizeBucket::medium;
  return SizeBucket::large;
}

EvalReport evaluate(std::span<const ImageDetection> preds, std::span<const GroundTruth> gts,
                    const EvalOptions& options) {
  if (!(options.iou_thr > 0.0 && options.iou_thr <= 1.0)) {
    throw ValidationError("evaluation iou_thr must lie in (0, 1]");
  }
  if (options.max_dets_per_image < 0) {
    throw ValidationError("max_dets_per_image must be >= 0");
  }
  if (gts.empty()) {
    throw UndefinedMetricError("cannot evaluate against an empty ground-truth set");
  }
  for (const ImageDetection& p : preds) validate(p.det);

  using Key = std::pair<int, int>;  // (image_id, category_id)
  std::map<Key, std::vector<GroundTruth>> gt_groups;
  std::set<int> categories;
  for (const GroundTruth& g : gts) {
    gt_groups[{g.image_id, g.category_id}].push_back(g);
    categories.insert(g.category_id);
  }

  // Per-image ranking, with the optional cap applied across categories.
  std::map<int, std::vector<const Detection*>> by_image;
  for (const ImageDetection& p : preds) by_image[p.image_id].push_back(&p.det);
  std::map<Key, std::vector<const Detection*>> pred_groups;
  int n_predictions = 0;
  for (auto& [image_id, dets] : by_image) {
    std::stable_sort(dets.begin(), dets.end(), [](const Detection* a, const Detection* b) { return ranks_before(*a, *b); });
    if (options.max_dets_per_image > 0 && dets.size() > static_cast<std::size_t>(options.max_dets_per_image)) {
      dets.resize(static_cast<std::size_t>(options.max_dets_per_image));
    }
    for (const Detection* d : dets) {
      pred_groups[{image_id, d->category_id}].push_back(d);
      ++n_predictions;
    }
  }

  struct Accumulated {
    std::vector<ScoredLabel> labels;
    int n_gt = 0;
    MatchCounts counts;
  };
  auto accumulate = [&](const AreaRange& range) {
    std::map<int, Accumulated> per_cat;
    std::set<Key> keys;
    for (const auto& [k, v] : gt_groups) keys.insert(k);
    for (const auto& [k, v] : pred_groups) keys.insert(k);
    static const std::vector<GroundTruth> kNoGt;
    static const std::vector<const Detection*> kNoPred;
    for (const Key& key : keys) {
      const auto git = gt_groups.find(key);
      const auto pit = pred_groups.find(key);
      const auto& g = git == gt_groups.end() ? kNoGt : git->second;
      const auto& p = pit == pred_groups.end() ? kNoPred : pit->second;
      Accumulated& acc = per_cat[key.second];
      for (const GroundTruth& gt : g) {
        if (!gt.ignore && range.contains(area(gt.box))) ++acc.n_gt;
      }
      const std::vector<MatchLabel> labels = match_sorted(p, g, options.iou_thr, range);
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (labels[i] == MatchLabel::ignored) continue;
        const bool tp = labels[i] == MatchLabel::tp;
        acc.labels.push_back(ScoredLabel{p[i]->score, tp, key.first, p[i]->box});
        ++(tp ? acc.counts.tp : acc.counts.fp);
      }
    }
    return per_cat;
  };

  EvalReport report;
  report.iou_thr = options.iou_thr;
  report.n_predictions = n_predictions;

  const auto overall = accumulate(AreaRange{});
  std::vector<PrCurve> curves;
  for (const auto& [category, acc] : overall) {
    // Predictions of categories absent from the ground truth still count as FPs.
    report.counts.fp += acc.counts.fp;
    if (acc.n_gt == 0) continue;
    report.counts.tp += acc.counts.tp;
    report.counts.fn += acc.n_gt - acc.counts.tp;
    report.n_gt += acc.n_gt;
    const PrCurve curve = precision_recall(acc.labels, acc.n_gt);
    report.per_category[category] = curve.ap;
    curves.push_back(curve);
  }
  if (curves.empty()) {
    throw UndefinedMetricError("every ground-truth box is marked ignore; AP is undefined");
  }
  for (int r = 0; r < kRecallPoints; ++r) {
    const auto i = static_cast<std::size_t>(r);
    double s = 0.0;
    for (const PrCurve& c : curves) s += c.precision[i];
    report.curve.precision[i] = s / static_cast<double>(curves.size());
    report.curve.recall[i] = r / 100.0;
  }
  double ap_sum = 0.0;
  for (const PrCurve& c : curves) ap_sum += c.ap;
  report.ap = ap_sum / static_cast<double>(curves.size());
  report.curve.ap = report.ap;

  for (SizeBucket bucket : kSizeBuckets) {
    const auto per_cat = accumulate(range_of(bucket));
    double sum = 0.0;
    int n = 0;
    for (const auto& [category, acc] : per_cat) {
      if (acc.n_gt == 0) continue;
      sum += average_precision(acc.labels, acc.n_gt);
      ++n;
    }
    report.per_bucket[bucket] = n > 0 ? std::optional<double>(sum / n) : std::nullopt;
  }
  return report;
}

}  // namespace ttafuse
