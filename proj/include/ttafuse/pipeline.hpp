#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "ttafuse/coco_io.hpp"
#include "ttafuse/fusion.hpp"
#include "ttafuse/tta.hpp"

namespace ttafuse {

/// Runs fn(0) .. fn(n - 1) on up to `threads` workers. The first exception
/// thrown (lowest index) is rethrown after all workers finish.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

/// Thread count from TTAFUSE_THREADS, else hardware concurrency.
int default_thread_count();

struct FuseSummary {
  int boxes_in = 0;
  int boxes_out = 0;
  int clusters_merged = 0;  // clusters with more than one member
  int dropped_in_padding = 0;
  int failed_views = 0;
};

/// Merges one detection file per view into an original-frame file. View-frame
/// files are mapped back through their header's view; file i becomes view i.
/// Throws ValidationError listing unknown image ids.
DetectionFile fuse_detection_files(const Dataset& dataset, const std::vector<DetectionFile>& files,
                                   const FusionConfig& cfg, int threads, FuseSummary* summary = nullptr);

struct DatasetTtaResult {
  // Indexed like dataset.images.
  std::vector<TtaResult> per_image;
  DetectionFile fused;
  FuseSummary summary;
};

/// run_tta over every image of a dataset. The detector is shared between
/// worker threads and must tolerate concurrent detect() calls.
DatasetTtaResult run_tta_dataset(const Dataset& dataset, const ViewPlan& plan, DetectorAdapter& detector,
                                 const FusionConfig& cfg, const TtaOptions& options, int threads);

}  // namespace ttafuse
