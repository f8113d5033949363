#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ttafuse/eval.hpp"
#include "ttafuse/fusion.hpp"
#include "ttafuse/synth.hpp"
#include "ttafuse/tta.hpp"

namespace ttafuse {

struct PlanSpec {
  std::vector<int> sizes;
  bool flip = false;

  ViewPlan build() const;
};

struct Strategy {
  std::string name;
  std::string plan;  // key into BenchConfig::plans
  FusionConfig fusion;
};

struct BenchConfig {
  SynthConfig synth;
  std::map<std::string, PlanSpec> plans;
  // Every defined strategy; `selected` picks which run, in order.
  std::vector<Strategy> strategies;
  std::vector<std::string> selected;
  double iou_thr = 0.5;
  int threads = 1;

  /// Built-in plans and strategies: single-1280, single-2560, single-3200,
  /// multiscale (3200/3360/3520) and multiscale+flip, all selected.
  static BenchConfig defaults();
  /// Throws ValidationError for unknown strategies or plans.
  void validate() const;
};

/// Overlays a JSON config document onto `base`. Unknown keys are rejected.
BenchConfig bench_config_from_json(const nlohmann::json& doc, BenchConfig base);
nlohmann::json bench_config_to_json(const BenchConfig& cfg);

struct BenchRow {
  std::string strategy;
  int n_views = 0;
  ConfMode conf_mode = ConfMode::scale_by_views;
  // AP at the configured conf_mode, and with the other mode for reference.
  double ap = 0.0;
  double ap_other_mode = 0.0;
  EvalReport report;
  double runtime_s = 0.0;
};

struct BenchResult {
  std::vector<BenchRow> rows;
};

/// generate -> detect -> fuse -> evaluate for every selected strategy. When
/// out_dir is non-empty, the dataset, per-view and fused detection files,
/// evaluation reports, tables and the effective config are written there;
/// their contents do not depend on the thread count.
BenchResult run_synth_bench(const BenchConfig& cfg, const std::filesystem::path& out_dir = {});

/// Human-readable table; runtimes are included only when asked.
std::string format_bench_table(const BenchResult& result, bool with_runtime);

}  // namespace ttafuse
