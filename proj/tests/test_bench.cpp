#include <gtest/gtest.h>

#include "ttafuse/bench.hpp"
#include "ttafuse/errors.hpp"

using namespace ttafuse;
using nlohmann::json;

TEST(BenchConfig, DefaultsMirrorTheComparisonTable) {
  const BenchConfig cfg = BenchConfig::defaults();
  ASSERT_EQ(cfg.selected.size(), 5u);
  EXPECT_EQ(cfg.selected.front(), "single-1280");
  EXPECT_EQ(cfg.selected.back(), "multiscale+flip");
  EXPECT_EQ(cfg.plans.at("multiscale+flip").build(), default_view_plan());
  EXPECT_EQ(cfg.synth.rng_seed, 42u);
  EXPECT_EQ(cfg.synth.n_images, 200);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(BenchConfig, JsonOverlayAndEcho) {
  const json doc = json::parse(R"({
    "synth": {"n_images": 7, "rng_seed": 5},
    "noise": {"fp_rate": 0.5},
    "plans": {"tiny": {"sizes": [640], "flip": true}},
    "strategies": [{"name": "tiny-wbf", "plan": "tiny", "fusion": {"conf_mode": "none", "iou_thr": 0.6}}],
    "selected": ["tiny-wbf", "single-1280"]
  })");
  const BenchConfig cfg = bench_config_from_json(doc, BenchConfig::defaults());
  EXPECT_EQ(cfg.synth.n_images, 7);
  EXPECT_EQ(cfg.synth.detector_noise.fp_rate, 0.5);
  EXPECT_EQ(cfg.selected.size(), 2u);
  EXPECT_NO_THROW(cfg.validate());

  const BenchConfig again = bench_config_from_json(bench_config_to_json(cfg), BenchConfig::defaults());
  EXPECT_EQ(bench_config_to_json(again), bench_config_to_json(cfg));
}

TEST(BenchConfig, Errors) {
  BenchConfig cfg = BenchConfig::defaults();
  cfg.selected = {"nope"};
  EXPECT_THROW(cfg.validate(), ValidationError);

  cfg = BenchConfig::defaults();
  cfg.strategies.push_back(Strategy{"orphan", "missing-plan", FusionConfig{}});
  EXPECT_THROW(cfg.validate(), ValidationError);

  EXPECT_THROW(bench_config_from_json(json::parse(R"({"bogus": 1})"), BenchConfig::defaults()), ValidationError);
  EXPECT_THROW(bench_config_from_json(json::parse(R"({"noise": {"fp_rat": 1}})"), BenchConfig::defaults()),
               ValidationError);
}

TEST(SynthBench, OneStrategyOneRow) {
  BenchConfig cfg = BenchConfig::defaults();
  cfg.synth.n_images = 10;
  cfg.selected = {"multiscale"};
  const BenchResult r = run_synth_bench(cfg);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].n_views, 3);
  EXPECT_GT(r.rows[0].ap, 0.0);
  const std::string table = format_bench_table(r, false);
  EXPECT_NE(table.find("multiscale"), std::string::npos);
  EXPECT_EQ(table.find("runtime"), std::string::npos);
}

TEST(SynthBench, NoiselessSaturates) {
  BenchConfig cfg = BenchConfig::defaults();
  cfg.synth.n_images = 20;
  cfg.synth.detector_noise = NoiseModel::noiseless();
  for (const BenchRow& row : run_synth_bench(cfg).rows) {
    EXPECT_EQ(row.ap, 1.0) << row.strategy;
    EXPECT_EQ(row.ap_other_mode, 1.0) << row.strategy;
  }
}
