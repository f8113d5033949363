#include "ttafuse/adapters.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <set>

#include "ttafuse/errors.hpp"

namespace ttafuse {

using nlohmann::json;

FileDetector::FileDetector(const std::vector<DetectionFile>& files) {
  for (std::size_t i = 0; i < files.size(); ++i) {
    const DetectionFile& f = files[i];
    if (f.frame != Frame::view || !f.view) {
      throw ValidationError("detection file " + std::to_string(i) + " has no view header with frame \"view\"");
    }
    if (by_view_.count(*f.view)) {
      throw ValidationError("two detection files share view " + to_string(*f.view));
    }
    order_.push_back(*f.view);
    auto& images = by_view_[*f.view];
    for (const ImageDetection& d : f.detections) images[d.image_id].push_back(d.det);
  }
}

std::vector<Detection> FileDetector::detect(const ImageRecord& image, const ViewSpec& view) {
  const auto it = by_view_.find(view);
  if (it == by_view_.end()) {
    throw DetectorError("no detection file for view " + to_string(view));
  }
  const auto found = it->second.find(image.image_id);
  return found == it->second.end() ? std::vector<Detection>{} : found->second;
}

ViewPlan FileDetector::plan() const { return ViewPlan(order_); }

SubprocessDetector::SubprocessDetector(std::string command) : command_(std::move(command)) {
  if (command_.empty()) throw ValidationError("subprocess detector needs a command");
}

std::string SubprocessDetector::format_request(const ImageRecord& image, const ViewSpec& view) {
  return json{{"image_id", image.image_id},
              {"file_name", image.file_name},
              {"width", image.dims.width()},
              {"height", image.dims.height()},
              {"target_size", view.target_size},
              {"hflip", view.hflip}}
      .dump();
}

std::vector<Detection> SubprocessDetector::parse_response(const std::string& line) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DetectorError(std::string("malformed detector response: ") + e.what());
  }
  const json& rows = doc.is_object() ? doc.value("detections", json()) : doc;
  if (!rows.is_array()) throw DetectorError("detector response has no detections list");
  std::vector<Detection> out;
  for (const json& row : rows) {
    if (!row.is_array() || row.size() != 6) {
      throw DetectorError("detector rows must be [x1, y1, x2, y2, score, category_id]");
    }
    try {
      Detection d{Box(row[0].get<double>(), row[1].get<double>(), row[2].get<double>(), row[3].get<double>()),
                  row[4].get<double>(), row[5].get<int>(), -1};
      validate(d);
      out.push_back(d);
    } catch (const std::exception& e) {
      throw DetectorError(std::string("bad detector row: ") + e.what());
    }
  }
  return out;
}

namespace {

struct TempFile {
  std::string path;
  TempFile() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "ttafuse-req-XXXXXX").string();
    const int fd = mkstemp(tmpl.data());
    if (fd < 0) throw DetectorError("cannot create request file");
    close(fd);
    path = tmpl;
  }
  ~TempFile() { std::remove(path.c_str()); }
  TempFile(const TempFile&) = delete;
  TempFile& operator=(const TempFile&) = delete;
};

}  // namespace

std::vector<Detection> SubprocessDetector::detect(const ImageRecord& image, const ViewSpec& view) {
  TempFile request;
  write_text(request.path, format_request(image, view) + "\n");

  const std::string cmd = "(" + command_ + ") < '" + request.path + "'";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) throw DetectorError("cannot start detector command");
  std::string output;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) output.append(buf, n);
  const int status = pclose(pipe);
  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw DetectorError("detector command exited with status " +
                        std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : status));
  }
  // Last non-empty line is the response; anything before it is ignored.
  std::string last;
  std::size_t start = 0;
  while (start < output.size()) {
    std::size_t end = output.find('\n', start);
    if (end == std::string::npos) end = output.size();
    const std::string line = output.substr(start, end - start);
    if (line.find_first_not_of(" \t\r") != std::string::npos) last = line;
    start = end + 1;
  }
  if (last.empty()) throw DetectorError("detector command printed no response");
  return parse_response(last);
}

}  // namespace ttafuse
