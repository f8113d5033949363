// ttafuse: test-time augmentation fusion and evaluation for object detection.
//
// Exit codes: 0 success, 1 validation error, 2 I/O error, 3 detector failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ttafuse/adapters.hpp"
#include "ttafuse/bench.hpp"
#include "ttafuse/coco_io.hpp"
#include "ttafuse/errors.hpp"
#include "ttafuse/eval.hpp"
#include "ttafuse/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ttafuse;

namespace {

struct FusionFlags {
  std::optional<double> iou_thr;
  std::optional<double> skip_box_thr;
  std::optional<std::string> conf_mode;
  std::vector<double> weights;
};

void add_fusion_flags(CLI::App* app, FusionFlags& f) {
  app->add_option("--iou-thr", f.iou_thr, "WBF cluster IoU threshold (default 0.55)");
  app->add_option("--skip-box-thr", f.skip_box_thr, "drop detections scoring below this before fusion (default 0)");
  app->add_option("--conf-mode", f.conf_mode, "none | scale_by_views (default scale_by_views)");
  app->add_option("--weights", f.weights, "per-view weights, comma separated")->delimiter(',');
}

FusionConfig apply(const FusionFlags& f, FusionConfig cfg) {
  if (f.iou_thr) cfg.iou_thr = *f.iou_thr;
  if (f.skip_box_thr) cfg.skip_box_thr = *f.skip_box_thr;
  if (f.conf_mode) cfg.conf_mode = conf_mode_from_string(*f.conf_mode);
  if (!f.weights.empty()) cfg.view_weights = f.weights;
  cfg.validate();
  return cfg;
}

FusionConfig fusion_from_file(const json& doc) {
  FusionConfig cfg;
  const json f = doc.value("fusion", json::object());
  cfg.iou_thr = f.value("iou_thr", cfg.iou_thr);
  cfg.skip_box_thr = f.value("skip_box_thr", cfg.skip_box_thr);
  cfg.view_weights = f.value("view_weights", cfg.view_weights);
  if (f.contains("conf_mode")) cfg.conf_mode = conf_mode_from_string(f["conf_mode"].get<std::string>());
  return cfg;
}

void emit(const std::optional<fs::path>& out, const std::string& text) {
  if (out) {
    write_text(*out, text);
  } else {
    std::cout << text;
  }
}

// --- plan ------------------------------------------------------------------

struct PlanArgs {
  std::vector<int> sizes{3200, 3360, 3520};
  bool no_flip = false;
  std::optional<fs::path> output;
};

int run_plan(const PlanArgs& a) {
  const ViewPlan plan = make_view_plan(a.sizes, !a.no_flip);
  emit(a.output, plan_to_json(plan).dump(2) + "\n");
  return 0;
}

// --- fuse ------------------------------------------------------------------

struct FuseArgs {
  fs::path dataset;
  std::vector<fs::path> inputs;
  std::optional<fs::path> config;
  std::optional<fs::path> output;
  std::optional<fs::path> plan;
  std::string detector_cmd;
  bool lenient = false;
  std::optional<int> threads;
  FusionFlags fusion;
};

int run_fuse(const FuseArgs& a) {
  json file_cfg = json::object();
  if (a.config) file_cfg = read_json(*a.config);
  const FusionConfig cfg = apply(a.fusion, fusion_from_file(file_cfg));
  const int threads = a.threads.value_or(file_cfg.value("threads", default_thread_count()));
  if (threads < 1) throw ValidationError("--threads must be >= 1");

  const Dataset dataset = read_dataset(a.dataset);
  DetectionFile fused;
  FuseSummary s;
  json effective{{"schema_version", kSchemaVersion},
                 {"kind", "fuse_config"},
                 {"fusion",
                  {{"iou_thr", cfg.iou_thr},
                   {"skip_box_thr", cfg.skip_box_thr},
                   {"view_weights", cfg.view_weights},
                   {"conf_mode", std::string(to_string(cfg.conf_mode))}}},
                 {"dataset", a.dataset.string()}};

  if (!a.detector_cmd.empty()) {
    if (!a.inputs.empty()) throw ValidationError("use either detection files or --detector-cmd, not both");
    ViewPlan plan = default_view_plan();
    if (a.plan) {
      plan = read_plan(*a.plan);
    } else if (file_cfg.contains("plan")) {
      plan = plan_from_json(file_cfg["plan"]);
    }
    SubprocessDetector detector(a.detector_cmd);
    DatasetTtaResult r = run_tta_dataset(dataset, plan, detector, cfg, TtaOptions{a.lenient}, threads);
    fused = std::move(r.fused);
    s = r.summary;
    effective["plan"] = plan_to_json(plan);
    effective["detector_cmd"] = a.detector_cmd;
    effective["lenient"] = a.lenient;
  } else {
    if (a.inputs.empty()) throw ValidationError("fuse needs at least one detection file (-i) or --detector-cmd");
    std::vector<DetectionFile> files;
    json inputs = json::array();
    for (const fs::path& p : a.inputs) {
      files.push_back(read_detection_file(p));
      inputs.push_back(p.string());
    }
    fused = fuse_detection_files(dataset, files, cfg, threads, &s);
    effective["inputs"] = inputs;
  }

  emit(a.output, format_detection_file(fused));
  if (a.output) write_text(a.output->string() + ".config.json", effective.dump(2) + "\n");
  std::fprintf(stderr, "boxes in: %d, boxes out: %d, merged clusters: %d, dropped in padding: %d, failed views: %d\n",
               s.boxes_in, s.boxes_out, s.clusters_merged, s.dropped_in_padding, s.failed_views);
  return 0;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  fs::path dataset;
  fs::path detections;
  double iou_thr = 0.5;
  int max_dets = 0;
  std::optional<fs::path> json_out;
};

int run_eval(const EvalArgs& a) {
  const Dataset dataset = read_dataset(a.dataset);
  const DetectionFile dets = read_detection_file(a.detections);
  if (dets.frame == Frame::view) {
    throw ValidationError(a.detections.string() +
                          " is in view coordinates; run `ttafuse fuse` first to map it to the original frame");
  }
  EvalOptions options;
  options.iou_thr = a.iou_thr;
  options.max_dets_per_image = a.max_dets;
  const EvalReport r = evaluate(dets.detections, dataset.ground_truth(), options);

  std::printf("AP@%.2f          %.4f  (%.2f)\n", r.iou_thr, r.ap, r.ap * 100.0);
  for (const auto& [bucket, ap] : r.per_bucket) {
    if (ap) {
      std::printf("  %-14s %.4f  (%.2f)\n", to_string(bucket).c_str(), *ap, *ap * 100.0);
    } else {
      std::printf("  %-14s    -    (no ground truth)\n", to_string(bucket).c_str());
    }
  }
  std::printf("TP %d  FP %d  FN %d  (%d ground truth, %d predictions)\n", r.counts.tp, r.counts.fp, r.counts.fn,
              r.n_gt, r.n_predictions);
  if (a.json_out) write_text(*a.json_out, report_to_json(r).dump(2) + "\n");
  return 0;
}

// --- synth-bench -----------------------------------------------------------

struct BenchArgs {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<int> images;
  std::vector<std::string> strategies;
  std::optional<fs::path> out_dir;
  std::optional<int> threads;
  std::optional<double> correlation;
  bool noiseless = false;
};

int run_bench(const BenchArgs& a) {
  BenchConfig cfg = BenchConfig::defaults();
  cfg.threads = default_thread_count();
  if (a.config) cfg = bench_config_from_json(read_json(*a.config), cfg);
  if (a.seed) cfg.synth.rng_seed = *a.seed;
  if (a.images) cfg.synth.n_images = *a.images;
  if (!a.strategies.empty()) cfg.selected = a.strategies;
  if (a.threads) cfg.threads = *a.threads;
  if (a.noiseless) cfg.synth.detector_noise = NoiseModel::noiseless();
  if (a.correlation) cfg.synth.detector_noise.view_noise_correlation = *a.correlation;

  const fs::path out = a.out_dir.value_or(fs::path("synth_bench_out"));
  const BenchResult result = run_synth_bench(cfg, out);
  std::cout << format_bench_table(result, true);
  std::cout << "outputs written to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Test-time augmentation fusion and AP@0.5 evaluation for object detection"};
  app.require_subcommand(1);

  PlanArgs plan_args;
  auto* plan = app.add_subcommand("plan", "emit a view plan document");
  plan->add_option("--sizes", plan_args.sizes, "square target sizes, comma separated")->delimiter(',');
  plan->add_flag("--no-flip", plan_args.no_flip, "omit horizontally flipped views");
  plan->add_option("-o,--output", plan_args.output, "write to file instead of stdout");

  FuseArgs fuse_args;
  auto* fuse = app.add_subcommand("fuse", "merge per-view detections with weighted boxes fusion");
  fuse->add_option("-d,--dataset", fuse_args.dataset, "COCO-style dataset (image sizes)")->required();
  fuse->add_option("-i,--input", fuse_args.inputs, "detection file, one per view (repeatable)");
  fuse->add_option("-c,--config", fuse_args.config, "JSON config file; flags take precedence");
  fuse->add_option("-o,--output", fuse_args.output, "output detection file (default stdout)");
  fuse->add_option("--plan", fuse_args.plan, "view plan for --detector-cmd (default 3200/3360/3520 x flip)");
  fuse->add_option("--detector-cmd", fuse_args.detector_cmd, "external detector speaking the JSON-lines protocol");
  fuse->add_flag("--lenient", fuse_args.lenient, "fuse the views that succeeded when a detector call fails");
  fuse->add_option("-j,--threads", fuse_args.threads, "worker threads (default $TTAFUSE_THREADS or all cores)");
  add_fusion_flags(fuse, fuse_args.fusion);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "AP at an IoU threshold, overall and per object size");
  eval->add_option("-d,--dataset", eval_args.dataset, "COCO-style ground truth")->required();
  eval->add_option("-p,--detections", eval_args.detections, "detection file in the original frame")->required();
  eval->add_option("--iou-thr", eval_args.iou_thr, "matching IoU threshold (default 0.5)");
  eval->add_option("--max-dets", eval_args.max_dets, "keep the top-k detections per image, 0 = unlimited");
  eval->add_option("--json", eval_args.json_out, "write the machine-readable report here");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("synth-bench", "compare TTA strategies on a synthetic small-object benchmark");
  bench->add_option("-c,--config", bench_args.config, "JSON bench config; flags take precedence");
  bench->add_option("--seed", bench_args.seed, "dataset and detector seed (default 42)");
  bench->add_option("--images", bench_args.images, "number of images (default 200)");
  bench->add_option("--strategies", bench_args.strategies, "strategy names, comma separated")->delimiter(',');
  bench->add_option("-o,--out", bench_args.out_dir, "output directory (default ./synth_bench_out)");
  bench->add_option("-j,--threads", bench_args.threads, "worker threads (default $TTAFUSE_THREADS or all cores)");
  bench->add_option("--correlation", bench_args.correlation, "per-object noise correlation across views");
  bench->add_flag("--noiseless", bench_args.noiseless, "use a perfect detector");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*plan) return run_plan(plan_args);
    if (*fuse) return run_fuse(fuse_args);
    if (*eval) return run_eval(eval_args);
    if (*bench) return run_bench(bench_args);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const UndefinedMetricError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 2;
  } catch (const DetectorError& e) {
    std::cerr << "detector error: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: bad configuration value: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
