#include "ttafuse/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <map>
#include <set>
#include <string>
#include <thread>

#include "ttafuse/errors.hpp"

namespace ttafuse {

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

int default_thread_count() {
  if (const char* env = std::getenv("TTAFUSE_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw ValidationError(std::string("TTAFUSE_THREADS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

void append_fused(DetectionFile& out, int image_id, const std::vector<FusedDetection>& fused, FuseSummary& s) {
  for (const FusedDetection& f : fused) {
    out.detections.push_back(ImageDetection{image_id, to_detection(f)});
    if (f.cluster_size > 1) ++s.clusters_merged;
  }
  s.boxes_out += static_cast<int>(fused.size());
}

}  // namespace

DetectionFile fuse_detection_files(const Dataset& dataset, const std::vector<DetectionFile>& files,
                                   const FusionConfig& cfg, int threads, FuseSummary* summary) {
  if (files.empty()) throw ValidationError("fuse needs at least one detection file");
  cfg.validate();
  std::map<int, std::size_t> image_index;
  for (std::size_t i = 0; i < dataset.images.size(); ++i) image_index[dataset.images[i].image_id] = i;

  std::set<int> unknown;
  for (std::size_t f = 0; f < files.size(); ++f) {
    if (files[f].frame == Frame::view && !files[f].view) {
      throw ValidationError("detection file " + std::to_string(f) + " declares frame \"view\" without a view header");
    }
    for (const ImageDetection& d : files[f].detections) {
      if (!image_index.count(d.image_id)) unknown.insert(d.image_id);
    }
  }
  if (!unknown.empty()) {
    std::string ids;
    for (int id : unknown) ids += (ids.empty() ? "" : ", ") + std::to_string(id);
    throw ValidationError("detections reference image ids missing from the dataset: " + ids);
  }

  // per_image[i][f]: detections of file f for image i, in the original frame.
  std::vector<std::vector<Detection>> per_image(dataset.images.size());
  FuseSummary s;
  for (std::size_t f = 0; f < files.size(); ++f) {
    for (const ImageDetection& d : files[f].detections) {
      ++s.boxes_in;
      const std::size_t i = image_index.at(d.image_id);
      Detection det = d.det;
      det.source_view = static_cast<int>(f);
      if (files[f].frame == Frame::view) {
        auto mapped = view_to_original(det, *files[f].view, dataset.images[i].dims);
        if (!mapped) {
          ++s.dropped_in_padding;
          continue;
        }
        det = *mapped;
      }
      per_image[i].push_back(det);
    }
  }

  const int n_views = static_cast<int>(files.size());
  std::vector<std::vector<FusedDetection>> fused(dataset.images.size());
  parallel_for(dataset.images.size(), threads, [&](std::size_t i) { fused[i] = wbf(per_image[i], n_views, cfg); });

  DetectionFile out;
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    append_fused(out, dataset.images[i].image_id, fused[i], s);
  }
  if (summary) *summary = s;
  return out;
}

DatasetTtaResult run_tta_dataset(const Dataset& dataset, const ViewPlan& plan, DetectorAdapter& detector,
                                 const FusionConfig& cfg, const TtaOptions& options, int threads) {
  DatasetTtaResult result;
  result.per_image.resize(dataset.images.size());
  parallel_for(dataset.images.size(), threads, [&](std::size_t i) {
    result.per_image[i] = run_tta(dataset.images[i], plan, detector, cfg, options);
  });
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    const TtaResult& r = result.per_image[i];
    result.summary.boxes_in += r.stats.detections_in;
    result.summary.dropped_in_padding += r.stats.dropped_in_padding;
    result.summary.failed_views += r.stats.failed_views;
    append_fused(result.fused, dataset.images[i].image_id, r.detections, result.summary);
  }
  return result;
}

}  // namespace ttafuse
