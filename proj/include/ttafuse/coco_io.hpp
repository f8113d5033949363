#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ttafuse/eval.hpp"
#include "ttafuse/tta.hpp"

namespace ttafuse {

inline constexpr int kSchemaVersion = 1;

/// COCO [x, y, w, h] to corners; x2 is computed as x + w.
Box box_from_xywh(double x, double y, double w, double h);

/// Corners to COCO [x, y, w, h]. The width is chosen so that x + w
/// reproduces x2 exactly whenever such a double exists, which makes
/// write-then-read lossless.
std::array<double, 4> xywh_from_box(const Box& b);

struct Category {
  int id = 0;
  std::string name;
  friend bool operator==(const Category&, const Category&) = default;
};

struct Annotation {
  int id = 0;
  GroundTruth gt;
};

/// COCO-style annotation document.
struct Dataset {
  std::vector<ImageRecord> images;
  std::vector<Annotation> annotations;
  std::vector<Category> categories;

  const ImageRecord* find_image(int image_id) const;
  std::vector<GroundTruth> ground_truth() const;
};

Dataset dataset_from_json(const nlohmann::json& doc);
nlohmann::json dataset_to_json(const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const Dataset& ds);

enum class Frame { original, view };

/// COCO results list plus an optional header naming the view and frame.
struct DetectionFile {
  Frame frame = Frame::original;
  std::optional<ViewSpec> view;
  std::vector<ImageDetection> detections;
};

/// Accepts either line-delimited JSON (optional header line first) or a
/// plain COCO results array.
DetectionFile parse_detection_file(const std::string& text);
DetectionFile read_detection_file(const std::filesystem::path& path);
/// Header line with schema_version, then one result object per line.
std::string format_detection_file(const DetectionFile& file);
void write_detection_file(const std::filesystem::path& path, const DetectionFile& file);

nlohmann::json plan_to_json(const ViewPlan& plan);
ViewPlan plan_from_json(const nlohmann::json& doc);
ViewPlan read_plan(const std::filesystem::path& path);

nlohmann::json report_to_json(const EvalReport& report);

std::string read_text(const std::filesystem::path& path);
/// Writes through a temporary file in the same directory, then renames.
void write_text(const std::filesystem::path& path, const std::string& text);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace ttafuse
