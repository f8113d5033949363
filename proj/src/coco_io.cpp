#include "ttafuse/coco_io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "ttafuse/errors.hpp"

namespace ttafuse {

using nlohmann::json;

namespace {

// Width w with lo + w == hi, searching a few ulps around hi - lo.
double exact_extent(double lo, double hi) {
  const double w = hi - lo;
  double up = w;
  double down = w;
  for (int k = 0; k <= 4; ++k) {
    if (lo + up == hi) return up;
    if (down >= 0.0 && lo + down == hi) return down;
    up = std::nextafter(up, INFINITY);
    down = std::nextafter(down, -INFINITY);
  }
  return w;
}

template <typename T>
T field(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    throw ValidationError(where + ": missing field '" + key + "'");
  }
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(where + ": bad field '" + key + "': " + e.what());
  }
}

Box parse_bbox(const json& obj, const std::string& where) {
  const auto v = field<std::vector<double>>(obj, "bbox", where);
  if (v.size() != 4) throw ValidationError(where + ": bbox must have 4 numbers");
  if (v[2] < 0.0 || v[3] < 0.0) throw ValidationError(where + ": bbox width and height must be >= 0");
  return box_from_xywh(v[0], v[1], v[2], v[3]);
}

json bbox_json(const Box& b) {
  const auto v = xywh_from_box(b);
  return json::array({v[0], v[1], v[2], v[3]});
}

json view_to_json(const ViewSpec& v) { return json{{"target_size", v.target_size}, {"hflip", v.hflip}}; }

ViewSpec view_from_json(const json& obj, const std::string& where) {
  ViewSpec v{field<int>(obj, "target_size", where), obj.value("hflip", false)};
  if (v.target_size < kMinTargetSize) {
    throw ValidationError(where + ": target_size must be >= " + std::to_string(kMinTargetSize));
  }
  return v;
}

bool is_header(const json& obj) {
  return obj.is_object() && !obj.contains("image_id") &&
         (obj.contains("schema_version") || obj.contains("frame") || obj.contains("view"));
}

ImageDetection detection_from_json(const json& obj, const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + ": expected an object");
  ImageDetection d;
  d.image_id = field<int>(obj, "image_id", where);
  d.det.category_id = field<int>(obj, "category_id", where);
  d.det.box = parse_bbox(obj, where);
  d.det.score = field<double>(obj, "score", where);
  if (!(d.det.score >= 0.0 && d.det.score <= 1.0)) {
    throw ValidationError(where + ": score must lie in [0, 1]");
  }
  return d;
}

}  // namespace

Box box_from_xywh(double x, double y, double w, double h) { return Box(x, y, x + w, y + h); }

std::array<double, 4> xywh_from_box(const Box& b) {
  return {b.x1(), b.y1(), exact_extent(b.x1(), b.x2()), exact_extent(b.y1(), b.y2())};
}

const ImageRecord* Dataset::find_image(int image_id) const {
  for (const ImageRecord& im : images) {
    if (im.image_id == image_id) return &im;
  }
  return nullptr;
}

std::vector<GroundTruth> Dataset::ground_truth() const {
  std::vector<GroundTruth> out;
  out.reserve(annotations.size());
  for (const Annotation& a : annotations) out.push_back(a.gt);
  return out;
}

Dataset dataset_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("dataset: expected a JSON object");
  Dataset ds;
  std::set<int> image_ids;
  for (const json& im : doc.value("images", json::array())) {
    const std::string where = "dataset image";
    const int id = field<int>(im, "id", where);
    if (!image_ids.insert(id).second) throw ValidationError("dataset: duplicate image id " + std::to_string(id));
    ds.images.push_back(ImageRecord{id, ImageDims(field<int>(im, "width", where), field<int>(im, "height", where)),
                                    im.value("file_name", std::string())});
  }
  std::set<int> category_ids;
  for (const json& c : doc.value("categories", json::array())) {
    const int id = field<int>(c, "id", "dataset category");
    category_ids.insert(id);
    ds.categories.push_back(Category{id, c.value("name", std::string())});
  }
  for (const json& a : doc.value("annotations", json::array())) {
    const std::string where = "annotation " + std::to_string(a.value("id", -1));
    Annotation ann;
    ann.id = field<int>(a, "id", where);
    ann.gt.image_id = field<int>(a, "image_id", where);
    ann.gt.category_id = field<int>(a, "category_id", where);
    ann.gt.box = parse_bbox(a, where);
    ann.gt.ignore = a.value("iscrowd", 0) != 0 || a.value("ignore", 0) != 0;
    if (!image_ids.count(ann.gt.image_id)) {
      throw ValidationError(where + ": unknown image_id " + std::to_string(ann.gt.image_id));
    }
    if (!category_ids.empty() && !category_ids.count(ann.gt.category_id)) {
      throw ValidationError(where + ": unknown category_id " + std::to_string(ann.gt.category_id));
    }
    ds.annotations.push_back(ann);
  }
  return ds;
}

json dataset_to_json(const Dataset& ds) {
  json images = json::array();
  for (const ImageRecord& im : ds.images) {
    images.push_back(json{{"id", im.image_id},
                          {"width", im.dims.width()},
                          {"height", im.dims.height()},
                          {"file_name", im.file_name}});
  }
  json annotations = json::array();
  for (const Annotation& a : ds.annotations) {
    annotations.push_back(json{{"id", a.id},
                               {"image_id", a.gt.image_id},
                               {"category_id", a.gt.category_id},
                               {"bbox", bbox_json(a.gt.box)},
                               {"area", area(a.gt.box)},
                               {"iscrowd", a.gt.ignore ? 1 : 0}});
  }
  json categories = json::array();
  for (const Category& c : ds.categories) categories.push_back(json{{"id", c.id}, {"name", c.name}});
  return json{{"images", images}, {"annotations", annotations}, {"categories", categories}};
}

Dataset read_dataset(const std::filesystem::path& path) { return dataset_from_json(read_json(path)); }

void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
  write_text(path, dataset_to_json(ds).dump() + "\n");
}

DetectionFile parse_detection_file(const std::string& text) {
  DetectionFile file;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return file;

  if (text[first] == '[') {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw IoError(std::string("malformed detection array: ") + e.what());
    }
    for (std::size_t i = 0; i < doc.size(); ++i) {
      file.detections.push_back(detection_from_json(doc[i], "detection " + std::to_string(i)));
    }
    return file;
  }

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IoError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    if (!header_seen && file.detections.empty() && is_header(obj)) {
      header_seen = true;
      const int version = obj.value("schema_version", kSchemaVersion);
      if (version != kSchemaVersion) {
        throw ValidationError("unsupported detection schema_version " + std::to_string(version));
      }
      const std::string frame = obj.value("frame", std::string("original"));
      if (frame == "view") {
        file.frame = Frame::view;
      } else if (frame != "original") {
        throw ValidationError("header frame must be \"view\" or \"original\", got \"" + frame + "\"");
      }
      if (obj.contains("view") && !obj["view"].is_null()) file.view = view_from_json(obj["view"], "header view");
      continue;
    }
    file.detections.push_back(detection_from_json(obj, "line " + std::to_string(line_no)));
  }
  return file;
}

DetectionFile read_detection_file(const std::filesystem::path& path) {
  try {
    return parse_detection_file(read_text(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::string format_detection_file(const DetectionFile& file) {
  json header{{"schema_version", kSchemaVersion},
              {"kind", "detections"},
              {"frame", file.frame == Frame::view ? "view" : "original"}};
  if (file.view) header["view"] = view_to_json(*file.view);
  std::string out = header.dump() + "\n";
  for (const ImageDetection& d : file.detections) {
    out += json{{"image_id", d.image_id},
                {"category_id", d.det.category_id},
                {"bbox", bbox_json(d.det.box)},
                {"score", d.det.score}}
               .dump();
    out += "\n";
  }
  return out;
}

void write_detection_file(const std::filesystem::path& path, const DetectionFile& file) {
  write_text(path, format_detection_file(file));
}

json plan_to_json(const ViewPlan& plan) {
  json views = json::array();
  for (const ViewSpec& v : plan.views()) views.push_back(view_to_json(v));
  return json{{"schema_version", kSchemaVersion}, {"kind", "view_plan"}, {"views", views}};
}

ViewPlan plan_from_json(const json& doc) {
  const json& views = doc.is_array() ? doc : doc.value("views", json());
  if (!views.is_array()) throw ValidationError("view plan: expected a 'views' array");
  std::vector<ViewSpec> out;
  for (std::size_t i = 0; i < views.size(); ++i) out.push_back(view_from_json(views[i], "view " + std::to_string(i)));
  return ViewPlan(std::move(out));
}

ViewPlan read_plan(const std::filesystem::path& path) { return plan_from_json(read_json(path)); }

json report_to_json(const EvalReport& r) {
  json buckets = json::object();
  for (const auto& [bucket, ap] : r.per_bucket) {
    buckets[to_string(bucket)] = ap ? json(*ap) : json(nullptr);
  }
  json per_category = json::object();
  for (const auto& [category, ap] : r.per_category) per_category[std::to_string(category)] = ap;
  return json{{"schema_version", kSchemaVersion},
              {"kind", "eval_report"},
              {"iou_thr", r.iou_thr},
              {"ap", r.ap},
              {"ap_percent", r.ap * 100.0},
              {"per_category", per_category},
              {"per_bucket", buckets},
              {"counts", {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}}},
              {"n_gt", r.n_gt},
              {"n_predictions", r.n_predictions},
              {"recall_points", r.curve.recall},
              {"precision_curve", r.curve.precision}};
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path.string());
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out.flush()) throw IoError("error writing " + path.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw IoError(path.string() + ": malformed JSON: " + e.what());
  }
}

}  // namespace ttafuse
