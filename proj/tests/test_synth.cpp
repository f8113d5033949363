#include <gtest/gtest.h>

#include <cmath>

#include "ttafuse/errors.hpp"
#include "ttafuse/synth.hpp"

using namespace ttafuse;

TEST(GenerateDataset, EmptyScenes) {
  SynthConfig cfg;
  cfg.n_images = 1;
  cfg.objects_min = cfg.objects_max = 0;
  const SynthDataset ds = generate_dataset(cfg);
  EXPECT_EQ(ds.images.size(), 1u);
  EXPECT_TRUE(ds.annotations.empty());
}

TEST(GenerateDataset, DeterministicAndWithinBounds) {
  SynthConfig cfg;
  cfg.n_images = 100;
  cfg.objects_min = 1;
  cfg.objects_max = 5;
  const SynthDataset a = generate_dataset(cfg);
  const SynthDataset b = generate_dataset(cfg);
  ASSERT_EQ(a.annotations.size(), b.annotations.size());
  for (std::size_t i = 0; i < a.annotations.size(); ++i) {
    EXPECT_EQ(a.annotations[i].box, b.annotations[i].box);
  }
  EXPECT_GE(a.annotations.size(), 100u);
  EXPECT_LE(a.annotations.size(), 500u);
  for (const GroundTruth& g : a.annotations) {
    EXPECT_GE(g.box.x1(), 0.0);
    EXPECT_GE(g.box.y1(), 0.0);
    EXPECT_LE(g.box.x2(), cfg.image_size.width());
    EXPECT_LE(g.box.y2(), cfg.image_size.height());
    const double side = std::sqrt(area(g.box));
    EXPECT_GE(side, cfg.object_size_min - 1e-9);
    EXPECT_LE(side, cfg.object_size_max + 1e-9);
  }
  cfg.rng_seed = 43;
  EXPECT_NE(generate_dataset(cfg).annotations[0].box, a.annotations[0].box);
}

TEST(GenerateDataset, InfeasiblePlacementFails) {
  SynthConfig cfg;
  cfg.n_images = 1;
  cfg.image_size = ImageDims(64, 64);
  cfg.objects_min = cfg.objects_max = 50;
  cfg.object_size_min = cfg.object_size_max = 30;
  EXPECT_THROW(generate_dataset(cfg), ValidationError);
}

TEST(GenerateDataset, RejectsBadConfig) {
  SynthConfig cfg;
  cfg.objects_min = 5;
  cfg.objects_max = 2;
  EXPECT_THROW(generate_dataset(cfg), ValidationError);
  cfg = SynthConfig{};
  cfg.detector_noise.view_noise_correlation = 1.5;
  EXPECT_THROW(generate_dataset(cfg), ValidationError);
}

TEST(NoiseModel, ResolutionScaling) {
  NoiseModel n;
  n.miss_rate_base = 0.2;
  n.miss_rate_resolution_exponent = 1.0;
  n.jitter_px_at_ref = 2.0;
  EXPECT_DOUBLE_EQ(n.miss_rate(3200), 0.2);
  EXPECT_DOUBLE_EQ(n.miss_rate(1600), 0.4);
  EXPECT_DOUBLE_EQ(n.miss_rate(320), 1.0);
  EXPECT_DOUBLE_EQ(n.jitter_px(1280), 5.0);
  EXPECT_GT(n.miss_rate(1280), n.miss_rate(2560));
}

namespace {

const ImageRecord kImage{1, ImageDims(3200, 3200), "x.png"};

std::vector<GroundTruth> scene() {
  return {{1, Box(100, 100, 120, 118), 1, false}, {1, Box(1500, 900, 1530, 940), 1, false},
          {1, Box(3000, 3100, 3012, 3110), 1, false}};
}

}  // namespace

TEST(SyntheticDetector, NoiselessIsExact) {
  const auto gts = scene();
  for (const ViewSpec view : {ViewSpec{3200, false}, ViewSpec{1280, true}}) {
    const auto dets = synthetic_detector(kImage, gts, view, NoiseModel::noiseless(), 7);
    ASSERT_EQ(dets.size(), gts.size());
    for (std::size_t i = 0; i < gts.size(); ++i) {
      const auto expected = original_to_view(gts[i].box, view, kImage.dims);
      bool found = false;
      for (const Detection& d : dets) found |= d.box == expected;
      EXPECT_TRUE(found);
    }
  }
}

TEST(SyntheticDetector, FullMissRateDetectsNothing) {
  NoiseModel n = NoiseModel::noiseless();
  n.miss_rate_base = 1.0;
  EXPECT_TRUE(synthetic_detector(kImage, scene(), {3200, false}, n, 7).empty());
}

TEST(SyntheticDetector, DeterministicPerView) {
  const NoiseModel n;
  const auto a = synthetic_detector(kImage, scene(), {3360, true}, n, 9);
  const auto b = synthetic_detector(kImage, scene(), {3360, true}, n, 9);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, synthetic_detector(kImage, scene(), {3360, false}, n, 9));
}

TEST(SyntheticDetector, JitterScalesInverselyWithResolution) {
  // 2 px at 3200 becomes 5 px at 1280; Monte Carlo over 10,000 seeds.
  NoiseModel n = NoiseModel::noiseless();
  n.jitter_px_at_ref = 2.0;
  n.view_noise_correlation = 0.0;
  const std::vector<GroundTruth> gts{{1, Box(1000, 1000, 1200, 1200), 1, false}};
  const ViewSpec view{1280, false};
  double sum = 0.0, sum_sq = 0.0;
  const int draws = 10000;
  for (int s = 0; s < draws; ++s) {
    const auto dets = synthetic_detector(kImage, gts, view, n, static_cast<std::uint64_t>(s));
    ASSERT_EQ(dets.size(), 1u);
    const auto back = view_to_original(dets[0], view, kImage.dims);
    const double err = back->box.x1() - 1000.0;
    sum += err;
    sum_sq += err * err;
  }
  const double mean = sum / draws;
  const double sd = std::sqrt(sum_sq / draws - mean * mean);
  EXPECT_NEAR(sd, 5.0, 0.05 * 5.0);
}

TEST(SyntheticDetector, CorrelationControlsAgreementAcrossViews) {
  // Fully correlated noise: identical original-frame boxes in every unflipped view size ratio.
  NoiseModel n = NoiseModel::noiseless();
  n.jitter_px_at_ref = 3.0;
  n.view_noise_correlation = 1.0;
  const std::vector<GroundTruth> gts{{1, Box(1000, 1000, 1040, 1030), 1, false}};
  const auto a = synthetic_detector(kImage, gts, {3200, false}, n, 5);
  const auto b = synthetic_detector(kImage, gts, {3200, true}, n, 5);
  ASSERT_EQ(a.size(), 1u);
  ASSERT_EQ(b.size(), 1u);
  const auto ba = view_to_original(a[0], {3200, false}, kImage.dims);
  const auto bb = view_to_original(b[0], {3200, true}, kImage.dims);
  EXPECT_NEAR(ba->box.x1(), bb->box.x1(), 1e-9);
  EXPECT_NEAR(ba->score, bb->score, 1e-12);

  n.view_noise_correlation = 0.0;
  const auto c = synthetic_detector(kImage, gts, {3200, false}, n, 5);
  const auto d = synthetic_detector(kImage, gts, {3200, true}, n, 5);
  const auto bc = view_to_original(c[0], {3200, false}, kImage.dims);
  const auto bd = view_to_original(d[0], {3200, true}, kImage.dims);
  EXPECT_NE(bc->box.x1(), bd->box.x1());
}

TEST(SyntheticDetector, AdapterUnknownImage) {
  SynthConfig cfg;
  cfg.n_images = 2;
  SyntheticDetector detector(generate_dataset(cfg), NoiseModel{}, 1);
  EXPECT_NO_THROW(detector.detect(ImageRecord{2, cfg.image_size, ""}, {3200, false}));
  EXPECT_THROW(detector.detect(ImageRecord{99, cfg.image_size, ""}, {3200, false}), DetectorError);
}

TEST(MixSeed, SpreadsNearbyInputs) {
  EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
  EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
  EXPECT_EQ(mix_seed(42, 7), mix_seed(42, 7));
}
