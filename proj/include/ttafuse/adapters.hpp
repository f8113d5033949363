#pragma once

#include <map>
#include <string>
#include <vector>

#include "ttafuse/coco_io.hpp"
#include "ttafuse/tta.hpp"

namespace ttafuse {

/// Serves pre-computed per-view detections. Every file must carry a view
/// header and frame "view".
class FileDetector final : public DetectorAdapter {
 public:
  explicit FileDetector(const std::vector<DetectionFile>& files);

  std::vector<Detection> detect(const ImageRecord& image, const ViewSpec& view) override;

  /// Plan made of the files' views, in file order.
  ViewPlan plan() const;

 private:
  std::vector<ViewSpec> order_;
  std::map<ViewSpec, std::map<int, std::vector<Detection>>> by_view_;
};

/// Runs an external command once per (image, view).
///
/// The command receives one JSON line on stdin:
///   {"image_id": 7, "file_name": "a.jpg", "width": 3840, "height": 2160,
///    "target_size": 3200, "hflip": true}
/// and must print one JSON line on stdout, either a bare list or
///   {"detections": [[x1, y1, x2, y2, score, category_id], ...]}
/// with boxes in view coordinates. A non-zero exit status is a failure.
class SubprocessDetector final : public DetectorAdapter {
 public:
  explicit SubprocessDetector(std::string command);

  std::vector<Detection> detect(const ImageRecord& image, const ViewSpec& view) override;

  static std::string format_request(const ImageRecord& image, const ViewSpec& view);
  static std::vector<Detection> parse_response(const std::string& line);

 private:
  std::string command_;
};

}  // namespace ttafuse
