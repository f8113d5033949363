#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "ttafuse/adapters.hpp"
#include "ttafuse/errors.hpp"
#include "ttafuse/tta.hpp"

using namespace ttafuse;

namespace {

void expect_box_near(const Box& a, const Box& b, double tol) {
  EXPECT_NEAR(a.x1(), b.x1(), tol);
  EXPECT_NEAR(a.y1(), b.y1(), tol);
  EXPECT_NEAR(a.x2(), b.x2(), tol);
  EXPECT_NEAR(a.y2(), b.y2(), tol);
}

// Returns fixed original-frame boxes, forward-mapped into each view.
class StaticDetector : public DetectorAdapter {
 public:
  explicit StaticDetector(std::vector<Detection> original) : original_(std::move(original)) {}
  std::vector<Detection> detect(const ImageRecord& image, const ViewSpec& view) override {
    ++calls;
    std::vector<Detection> out;
    for (Detection d : original_) {
      d.box = original_to_view(d.box, view, image.dims);
      out.push_back(d);
    }
    return out;
  }
  int calls = 0;

 private:
  std::vector<Detection> original_;
};

class FailingDetector : public DetectorAdapter {
 public:
  explicit FailingDetector(int fail_size) : fail_size_(fail_size) {}
  std::vector<Detection> detect(const ImageRecord& image, const ViewSpec& view) override {
    if (view.target_size == fail_size_) throw std::runtime_error("boom");
    return {{original_to_view(Box(100, 100, 200, 200), view, image.dims), 0.9, 1, -1}};
  }

 private:
  int fail_size_;
};

ImageRecord image(int w, int h) { return ImageRecord{1, ImageDims(w, h), "img.png"}; }

}  // namespace

TEST(ViewPlan, Default) {
  const ViewPlan plan = default_view_plan();
  ASSERT_EQ(plan.size(), 6u);
  EXPECT_EQ(plan[0], (ViewSpec{3200, false}));
  EXPECT_EQ(plan[1], (ViewSpec{3200, true}));
  EXPECT_EQ(plan[5], (ViewSpec{3520, true}));
}

TEST(ViewPlan, SubsetsAndValidation) {
  const int single[] = {3200};
  EXPECT_EQ(make_view_plan(single, false).size(), 1u);
  const int multi[] = {3200, 3360, 3520};
  const ViewPlan ms = make_view_plan(multi, false);
  ASSERT_EQ(ms.size(), 3u);
  for (const ViewSpec& v : ms.views()) EXPECT_FALSE(v.hflip);
  const int dup[] = {3200, 3200};
  EXPECT_THROW(make_view_plan(dup, false), ValidationError);
  EXPECT_THROW(ViewPlan({}), ValidationError);
  EXPECT_THROW(ViewPlan({{16, false}}), ValidationError);
}

TEST(Letterbox, Parameters) {
  const Letterbox lb = Letterbox::compute(ImageDims(3840, 2160), 3200);
  EXPECT_DOUBLE_EQ(lb.scale, 3200.0 / 3840.0);
  EXPECT_DOUBLE_EQ(lb.pad_x, 0.0);
  EXPECT_NEAR(lb.pad_y, (3200.0 - 1800.0) / 2.0, 1e-9);
}

TEST(ViewToOriginal, Examples) {
  const Detection d{Box(200, 200, 400, 400), 0.5, 1, -1};
  auto same = view_to_original(d, {3200, false}, ImageDims(3200, 3200));
  ASSERT_TRUE(same);
  EXPECT_EQ(same->box, d.box);

  auto half = view_to_original(d, {3200, false}, ImageDims(1600, 1600));
  ASSERT_TRUE(half);
  expect_box_near(half->box, Box(100, 100, 200, 200), 1e-12);

  auto flipped = view_to_original(d, {3200, true}, ImageDims(1600, 1600));
  ASSERT_TRUE(flipped);
  expect_box_near(flipped->box, Box(1400, 100, 1500, 200), 1e-12);
}

TEST(ViewToOriginal, PaddingOnlyDetectionIsDropped) {
  // 3200x1600 into 3200: 800 px of padding above and below.
  const ImageDims dims(3200, 1600);
  EXPECT_FALSE(view_to_original({Box(10, 10, 50, 700), 0.5, 1, -1}, {3200, false}, dims));
  auto straddling = view_to_original({Box(10, 700, 50, 900), 0.5, 1, -1}, {3200, false}, dims);
  ASSERT_TRUE(straddling);
  expect_box_near(straddling->box, Box(10, 0, 50, 100), 1e-9);
}

TEST(ViewToOriginal, MatchesBruteForceForwardMapping) {
  // Independent forward map: resize, pad, mirror, written out by hand.
  std::mt19937_64 rng(3);
  const ImageDims dims(1920, 1080);
  const ViewPlan plan = default_view_plan();
  for (const ViewSpec& view : plan.views()) {
    const double s = view.target_size / 1920.0;
    const double pad_y = (view.target_size - 1080.0 * s) / 2.0;
    for (int gx = 0; gx < 10; ++gx) {
      for (int gy = 0; gy < 6; ++gy) {
        const Box b(gx * 190.0, gy * 175.0, gx * 190.0 + 37.5, gy * 175.0 + 21.25);
        double x1 = b.x1() * s, x2 = b.x2() * s;
        if (view.hflip) {
          const double mirrored_x1 = view.target_size - x2;
          x2 = view.target_size - x1;
          x1 = mirrored_x1;
        }
        const Box in_view(x1, b.y1() * s + pad_y, x2, b.y2() * s + pad_y);
        expect_box_near(original_to_view(b, view, dims), in_view, 1e-9);
        auto back = view_to_original({in_view, 0.5, 1, -1}, view, dims);
        ASSERT_TRUE(back);
        expect_box_near(back->box, b, 1e-6);
      }
    }
  }
}

TEST(ViewToOriginal, FlipConsistency) {
  // Mapping a view-frame box back through a flipped view equals mapping it
  // through the unflipped view and then mirroring in the original frame.
  for (const ImageDims dims : {ImageDims(1000, 600), ImageDims(600, 1000)}) {
    for (int size : {640, 1280, 3200}) {
      const Detection d{Box(0.3 * size, 0.35 * size, 0.45 * size, 0.45 * size), 0.5, 1, -1};
      auto flipped = view_to_original(d, {size, true}, dims);
      auto plain = view_to_original(d, {size, false}, dims);
      ASSERT_TRUE(flipped && plain);
      expect_box_near(flipped->box, flip_h(plain->box, dims), 1e-6);
    }
  }
}

TEST(RunTta, SingleViewPassThrough) {
  const std::vector<Detection> dets{{Box(10, 10, 50, 50), 0.9, 1, -1}, {Box(100, 100, 140, 150), 0.4, 1, -1}};
  StaticDetector detector(dets);
  FusionConfig cfg;
  cfg.conf_mode = ConfMode::none;
  const auto r = run_tta(image(3200, 3200), ViewPlan({{3200, false}}), detector, cfg);
  ASSERT_EQ(r.detections.size(), 2u);
  EXPECT_EQ(r.detections[0].box, dets[0].box);
  EXPECT_EQ(r.detections[0].score, 0.9);
  EXPECT_EQ(r.detections[1].box, dets[1].box);
}

TEST(RunTta, SameBoxInTwoViewsFuses) {
  StaticDetector detector({{Box(100, 100, 140, 130), 0.8, 1, -1}});
  FusionConfig cfg;
  const auto r = run_tta(image(1920, 1080), ViewPlan({{3200, false}, {3200, true}}), detector, cfg);
  ASSERT_EQ(r.detections.size(), 1u);
  EXPECT_EQ(r.detections[0].cluster_size, 2);
  expect_box_near(r.detections[0].box, Box(100, 100, 140, 130), 1e-6);
  EXPECT_NEAR(r.detections[0].score, 0.8, 1e-9);
  EXPECT_EQ(detector.calls, 2);
}

TEST(RunTta, NothingDetected) {
  StaticDetector detector({});
  const auto r = run_tta(image(640, 480), default_view_plan(), detector, FusionConfig{});
  EXPECT_TRUE(r.detections.empty());
}

TEST(RunTta, ViewOrderDoesNotMatter) {
  StaticDetector detector({{Box(10, 10, 30, 25), 0.8, 1, -1}, {Box(12, 11, 31, 26), 0.6, 1, -1},
                           {Box(300, 200, 340, 230), 0.3, 2, -1}});
  const ViewPlan forward = default_view_plan();
  std::vector<ViewSpec> reversed(forward.views().rbegin(), forward.views().rend());
  const auto a = run_tta(image(1920, 1080), forward, detector, FusionConfig{});
  const auto b = run_tta(image(1920, 1080), ViewPlan(reversed), detector, FusionConfig{});
  ASSERT_EQ(a.detections.size(), b.detections.size());
  for (std::size_t i = 0; i < a.detections.size(); ++i) {
    EXPECT_EQ(a.detections[i].cluster_size, b.detections[i].cluster_size);
    expect_box_near(a.detections[i].box, b.detections[i].box, 1e-9);
    EXPECT_NEAR(a.detections[i].score, b.detections[i].score, 1e-12);
  }
}

TEST(RunTta, DetectorFailureAbortsUnlessLenient) {
  FailingDetector detector(3360);
  const ViewPlan plan = default_view_plan();
  try {
    run_tta(image(1000, 1000), plan, detector, FusionConfig{});
    FAIL() << "expected DetectorError";
  } catch (const DetectorError& e) {
    EXPECT_NE(std::string(e.what()).find("3360"), std::string::npos);
  }
  const auto r = run_tta(image(1000, 1000), plan, detector, FusionConfig{}, TtaOptions{true});
  EXPECT_EQ(r.stats.failed_views, 2);
  ASSERT_EQ(r.detections.size(), 1u);
  // Four successful views, all agreeing: scale_by_views leaves the score intact.
  EXPECT_EQ(r.detections[0].cluster_size, 4);
  EXPECT_NEAR(r.detections[0].score, 0.9, 1e-12);
}

TEST(RunTta, PaddingDropsAreCounted) {
  class PaddingDetector : public DetectorAdapter {
   public:
    std::vector<Detection> detect(const ImageRecord&, const ViewSpec&) override {
      return {{Box(5, 5, 20, 20), 0.5, 1, -1}};
    }
  } detector;
  const auto r = run_tta(image(3200, 1000), ViewPlan({{3200, false}}), detector, FusionConfig{});
  EXPECT_EQ(r.stats.dropped_in_padding, 1);
  EXPECT_TRUE(r.detections.empty());
}

TEST(FileDetector, ServesPerViewFiles) {
  DetectionFile f1;
  f1.frame = Frame::view;
  f1.view = ViewSpec{3200, false};
  f1.detections.push_back({1, {Box(0, 0, 10, 10), 0.5, 1, -1}});
  DetectionFile f2 = f1;
  f2.view = ViewSpec{3200, true};
  FileDetector detector({f1, f2});
  EXPECT_EQ(detector.plan().size(), 2u);
  EXPECT_EQ(detector.detect(image(100, 100), {3200, true}).size(), 1u);
  EXPECT_TRUE(detector.detect(ImageRecord{9, ImageDims(10, 10), ""}, {3200, true}).empty());
  EXPECT_THROW(detector.detect(image(100, 100), {1280, false}), DetectorError);

  DetectionFile original;
  EXPECT_THROW(FileDetector({original}), ValidationError);
  EXPECT_THROW(FileDetector({f1, f1}), ValidationError);
}

TEST(SubprocessDetector, ProtocolRoundTrip) {
  const std::string request = SubprocessDetector::format_request(image(640, 480), {3200, true});
  EXPECT_NE(request.find("\"target_size\":3200"), std::string::npos);
  EXPECT_NE(request.find("\"hflip\":true"), std::string::npos);

  const auto dets = SubprocessDetector::parse_response(R"({"detections": [[1, 2, 3, 4, 0.5, 7]]})");
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_EQ(dets[0].box, Box(1, 2, 3, 4));
  EXPECT_EQ(dets[0].category_id, 7);
  EXPECT_EQ(SubprocessDetector::parse_response("[]").size(), 0u);
  EXPECT_THROW(SubprocessDetector::parse_response("[[1, 2, 3]]"), DetectorError);
  EXPECT_THROW(SubprocessDetector::parse_response("[[3, 2, 1, 4, 0.5, 1]]"), DetectorError);
  EXPECT_THROW(SubprocessDetector::parse_response("not json"), DetectorError);
}

TEST(SubprocessDetector, RunsExternalCommand) {
  // Echoes the requested target size back as a box coordinate.
  const std::string script = R"py(python3 -c "import json,sys; r=json.loads(sys.stdin.readline()); s=r['target_size']; print(json.dumps({'detections': [[10, 10, s/100, 40, 0.75, 1]]}))")py";
  SubprocessDetector detector(script);
  const auto dets = detector.detect(image(640, 480), {3200, false});
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_EQ(dets[0].box.x2(), 32.0);
  EXPECT_EQ(dets[0].score, 0.75);

  SubprocessDetector failing("exit 4");
  EXPECT_THROW(failing.detect(image(640, 480), {3200, false}), DetectorError);
  SubprocessDetector silent("true");
  EXPECT_THROW(silent.detect(image(640, 480), {3200, false}), DetectorError);
}
