#include "ttafuse/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <set>

#include "ttafuse/coco_io.hpp"
#include "ttafuse/errors.hpp"
#include "ttafuse/pipeline.hpp"

namespace ttafuse {

using nlohmann::json;

namespace {

constexpr std::uint64_t kDetectorSeedTag = 0xDE7EC7;

ConfMode other(ConfMode m) { return m == ConfMode::none ? ConfMode::scale_by_views : ConfMode::none; }

std::string view_file_name(const ViewSpec& v) {
  return "view_" + std::to_string(v.target_size) + (v.hflip ? "_hflip" : "") + ".jsonl";
}

template <typename T>
void take(const json& obj, const char* key, T& dst) {
  if (const auto it = obj.find(key); it != obj.end()) {
    try {
      dst = it->get<T>();
    } catch (const json::exception& e) {
      throw ValidationError(std::string("config field '") + key + "': " + e.what());
    }
  }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ValidationError(where + ": unknown key '" + key + "'");
    }
  }
}

FusionConfig fusion_from_json(const json& obj, FusionConfig cfg) {
  reject_unknown(obj, {"iou_thr", "skip_box_thr", "view_weights", "conf_mode"}, "fusion config");
  take(obj, "iou_thr", cfg.iou_thr);
  take(obj, "skip_box_thr", cfg.skip_box_thr);
  take(obj, "view_weights", cfg.view_weights);
  if (obj.contains("conf_mode")) cfg.conf_mode = conf_mode_from_string(obj["conf_mode"].get<std::string>());
  cfg.validate();
  return cfg;
}

json fusion_to_json(const FusionConfig& cfg) {
  return json{{"iou_thr", cfg.iou_thr},
              {"skip_box_thr", cfg.skip_box_thr},
              {"view_weights", cfg.view_weights},
              {"conf_mode", std::string(to_string(cfg.conf_mode))}};
}

NoiseModel noise_from_json(const json& obj, NoiseModel n) {
  reject_unknown(obj,
                 {"ref_size", "miss_rate_base", "miss_rate_resolution_exponent", "jitter_px_at_ref", "fp_rate",
                  "fp_view_presence", "fp_size_min", "fp_size_max", "tp_score_a", "tp_score_b", "fp_score_a", "fp_score_b",
                  "view_noise_correlation", "output_nms_iou"},
                 "noise config");
  take(obj, "ref_size", n.ref_size);
  take(obj, "miss_rate_base", n.miss_rate_base);
  take(obj, "miss_rate_resolution_exponent", n.miss_rate_resolution_exponent);
  take(obj, "jitter_px_at_ref", n.jitter_px_at_ref);
  take(obj, "fp_rate", n.fp_rate);
  take(obj, "fp_view_presence", n.fp_view_presence);
  take(obj, "fp_size_min", n.fp_size_min);
  take(obj, "fp_size_max", n.fp_size_max);
  take(obj, "tp_score_a", n.tp_score_a);
  take(obj, "tp_score_b", n.tp_score_b);
  take(obj, "fp_score_a", n.fp_score_a);
  take(obj, "fp_score_b", n.fp_score_b);
  take(obj, "view_noise_correlation", n.view_noise_correlation);
  take(obj, "output_nms_iou", n.output_nms_iou);
  return n;
}

json noise_to_json(const NoiseModel& n) {
  return json{{"ref_size", n.ref_size},
              {"miss_rate_base", n.miss_rate_base},
              {"miss_rate_resolution_exponent", n.miss_rate_resolution_exponent},
              {"jitter_px_at_ref", n.jitter_px_at_ref},
              {"fp_rate", n.fp_rate},
              {"fp_view_presence", n.fp_view_presence},
              {"fp_size_min", n.fp_size_min},
              {"fp_size_max", n.fp_size_max},
              {"tp_score_a", n.tp_score_a},
              {"tp_score_b", n.tp_score_b},
              {"fp_score_a", n.fp_score_a},
              {"fp_score_b", n.fp_score_b},
              {"view_noise_correlation", n.view_noise_correlation},
              {"output_nms_iou", n.output_nms_iou}};
}

}  // namespace

ViewPlan PlanSpec::build() const { return make_view_plan(sizes, flip); }

BenchConfig BenchConfig::defaults() {
  BenchConfig cfg;
  cfg.plans = {
      {"single-1280", {{1280}, false}},
      {"single-2560", {{2560}, false}},
      {"single-3200", {{3200}, false}},
      {"multiscale", {{3200, 3360, 3520}, false}},
      {"multiscale+flip", {{3200, 3360, 3520}, true}},
  };
  for (const char* name : {"single-1280", "single-2560", "single-3200", "multiscale", "multiscale+flip"}) {
    cfg.strategies.push_back(Strategy{name, name, FusionConfig{}});
    cfg.selected.emplace_back(name);
  }
  return cfg;
}

void BenchConfig::validate() const {
  synth.validate();
  if (!(iou_thr > 0.0 && iou_thr <= 1.0)) throw ValidationError("evaluation iou_thr must lie in (0, 1]");
  if (threads < 1) throw ValidationError("thread count must be >= 1");
  if (selected.empty()) throw ValidationError("no strategies selected");
  for (const auto& [name, plan] : plans) {
    try {
      plan.build();
    } catch (const ValidationError& e) {
      throw ValidationError("plan '" + name + "': " + e.what());
    }
  }
  std::set<std::string> names;
  for (const Strategy& s : strategies) {
    if (!names.insert(s.name).second) throw ValidationError("strategy '" + s.name + "' is defined twice");
    if (!plans.count(s.plan)) {
      throw ValidationError("strategy '" + s.name + "' references undefined plan '" + s.plan + "'");
    }
    s.fusion.validate();
  }
  std::set<std::string> seen;
  for (const std::string& name : selected) {
    if (!names.count(name)) throw ValidationError("unknown strategy '" + name + "'");
    if (!seen.insert(name).second) throw ValidationError("strategy '" + name + "' selected twice");
  }
}

BenchConfig bench_config_from_json(const json& doc, BenchConfig cfg) {
  reject_unknown(doc, {"schema_version", "kind", "synth", "noise", "plans", "strategies", "selected", "iou_thr", "threads"},
                 "bench config");
  take(doc, "iou_thr", cfg.iou_thr);
  take(doc, "threads", cfg.threads);
  if (doc.contains("synth")) {
    const json& s = doc["synth"];
    reject_unknown(s,
                   {"n_images", "image_width", "image_height", "objects_min", "objects_max", "object_size_min",
                    "object_size_max", "category_id", "rng_seed"},
                   "synth config");
    take(s, "n_images", cfg.synth.n_images);
    int w = cfg.synth.image_size.width();
    int h = cfg.synth.image_size.height();
    take(s, "image_width", w);
    take(s, "image_height", h);
    cfg.synth.image_size = ImageDims(w, h);
    take(s, "objects_min", cfg.synth.objects_min);
    take(s, "objects_max", cfg.synth.objects_max);
    take(s, "object_size_min", cfg.synth.object_size_min);
    take(s, "object_size_max", cfg.synth.object_size_max);
    take(s, "category_id", cfg.synth.category_id);
    take(s, "rng_seed", cfg.synth.rng_seed);
  }
  if (doc.contains("noise")) cfg.synth.detector_noise = noise_from_json(doc["noise"], cfg.synth.detector_noise);
  if (doc.contains("plans")) {
    for (const auto& [name, p] : doc["plans"].items()) {
      reject_unknown(p, {"sizes", "flip"}, "plan '" + name + "'");
      PlanSpec spec;
      take(p, "sizes", spec.sizes);
      take(p, "flip", spec.flip);
      cfg.plans[name] = spec;
    }
  }
  if (doc.contains("strategies")) {
    for (const json& s : doc["strategies"]) {
      reject_unknown(s, {"name", "plan", "fusion"}, "strategy");
      Strategy strategy;
      take(s, "name", strategy.name);
      if (strategy.name.empty()) throw ValidationError("strategy without a name");
      strategy.plan = s.value("plan", strategy.name);
      strategy.fusion = fusion_from_json(s.value("fusion", json::object()), FusionConfig{});
      auto it = std::find_if(cfg.strategies.begin(), cfg.strategies.end(),
                             [&](const Strategy& x) { return x.name == strategy.name; });
      if (it != cfg.strategies.end()) {
        *it = strategy;
      } else {
        cfg.strategies.push_back(strategy);
      }
    }
  }
  take(doc, "selected", cfg.selected);
  return cfg;
}

json bench_config_to_json(const BenchConfig& cfg) {
  json plans = json::object();
  for (const auto& [name, p] : cfg.plans) plans[name] = json{{"sizes", p.sizes}, {"flip", p.flip}};
  json strategies = json::array();
  for (const Strategy& s : cfg.strategies) {
    strategies.push_back(json{{"name", s.name}, {"plan", s.plan}, {"fusion", fusion_to_json(s.fusion)}});
  }
  const SynthConfig& sc = cfg.synth;
  return json{{"schema_version", kSchemaVersion},
              {"kind", "bench_config"},
              {"synth",
               {{"n_images", sc.n_images},
                {"image_width", sc.image_size.width()},
                {"image_height", sc.image_size.height()},
                {"objects_min", sc.objects_min},
                {"objects_max", sc.objects_max},
                {"object_size_min", sc.object_size_min},
                {"object_size_max", sc.object_size_max},
                {"category_id", sc.category_id},
                {"rng_seed", sc.rng_seed}}},
              {"noise", noise_to_json(sc.detector_noise)},
              {"plans", plans},
              {"strategies", strategies},
              {"selected", cfg.selected},
              {"iou_thr", cfg.iou_thr}};
}

BenchResult run_synth_bench(const BenchConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  const bool persist = !out_dir.empty();

  const SynthDataset synth = generate_dataset(cfg.synth);
  Dataset dataset;
  dataset.images = synth.images;
  dataset.categories.push_back(Category{cfg.synth.category_id, "object"});
  for (std::size_t i = 0; i < synth.annotations.size(); ++i) {
    dataset.annotations.push_back(Annotation{static_cast<int>(i) + 1, synth.annotations[i]});
  }
  if (persist) {
    // Thread count is runtime-only and stays out of the persisted config.
    write_text(out_dir / "config.json", bench_config_to_json(cfg).dump(2) + "\n");
    write_dataset(out_dir / "dataset.json", dataset);
  }

  const std::vector<GroundTruth>& gts = synth.annotations;
  SyntheticDetector detector(synth, cfg.synth.detector_noise, mix_seed(cfg.synth.rng_seed, kDetectorSeedTag),
                             cfg.synth.category_id);
  EvalOptions eval_options;
  eval_options.iou_thr = cfg.iou_thr;

  BenchResult result;
  for (const std::string& name : cfg.selected) {
    const Strategy& strategy =
        *std::find_if(cfg.strategies.begin(), cfg.strategies.end(), [&](const Strategy& s) { return s.name == name; });
    const ViewPlan plan = cfg.plans.at(strategy.plan).build();
    const auto start = std::chrono::steady_clock::now();

    const DatasetTtaResult tta = run_tta_dataset(dataset, plan, detector, strategy.fusion, TtaOptions{}, cfg.threads);

    // The same mapped detections fused under the other confidence mode.
    FusionConfig alt = strategy.fusion;
    alt.conf_mode = other(strategy.fusion.conf_mode);
    std::vector<std::vector<FusedDetection>> alt_fused(dataset.images.size());
    parallel_for(dataset.images.size(), cfg.threads, [&](std::size_t i) {
      alt_fused[i] = wbf(tta.per_image[i].mapped, static_cast<int>(plan.size()), alt);
    });
    std::vector<ImageDetection> alt_dets;
    for (std::size_t i = 0; i < alt_fused.size(); ++i) {
      for (const FusedDetection& f : alt_fused[i]) {
        alt_dets.push_back(ImageDetection{dataset.images[i].image_id, to_detection(f)});
      }
    }

    BenchRow row;
    row.strategy = strategy.name;
    row.n_views = static_cast<int>(plan.size());
    row.conf_mode = strategy.fusion.conf_mode;
    row.report = evaluate(tta.fused.detections, gts, eval_options);
    row.ap = row.report.ap;
    row.ap_other_mode = evaluate(alt_dets, gts, eval_options).ap;
    row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (persist) {
      const std::filesystem::path dir = out_dir / strategy.name;
      for (std::size_t v = 0; v < plan.size(); ++v) {
        DetectionFile view_file;
        view_file.frame = Frame::view;
        view_file.view = plan[v];
        for (std::size_t i = 0; i < dataset.images.size(); ++i) {
          for (const Detection& d : tta.per_image[i].raw_per_view[v]) {
            view_file.detections.push_back(ImageDetection{dataset.images[i].image_id, d});
          }
        }
        write_detection_file(dir / view_file_name(plan[v]), view_file);
      }
      write_detection_file(dir / "fused.jsonl", tta.fused);
      write_text(dir / "eval.json", report_to_json(row.report).dump(2) + "\n");
    }
    result.rows.push_back(std::move(row));
  }

  if (persist) {
    json rows = json::array();
    for (const BenchRow& r : result.rows) {
      rows.push_back(json{{"strategy", r.strategy},
                          {"n_views", r.n_views},
                          {"conf_mode", std::string(to_string(r.conf_mode))},
                          {"ap50", r.ap},
                          {"ap50_other_conf_mode", r.ap_other_mode}});
    }
    write_text(out_dir / "table.json",
               json{{"schema_version", kSchemaVersion}, {"kind", "bench_table"}, {"rows", rows}}.dump(2) + "\n");
    write_text(out_dir / "table.txt", format_bench_table(result, false));
  }
  return result;
}

std::string format_bench_table(const BenchResult& result, bool with_runtime) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-20s %5s  %-15s %9s %7s  %13s", "strategy", "views", "conf_mode", "AP50",
                "AP50%", "AP50 alt-mode");
  out += line;
  out += with_runtime ? "  runtime_s\n" : "\n";
  for (const BenchRow& r : result.rows) {
    std::snprintf(line, sizeof(line), "%-20s %5d  %-15s %9.4f %7.2f  %13.4f", r.strategy.c_str(), r.n_views,
                  std::string(to_string(r.conf_mode)).c_str(), r.ap, r.ap * 100.0, r.ap_other_mode);
    out += line;
    if (with_runtime) {
      std::snprintf(line, sizeof(line), "  %9.3f", r.runtime_s);
      out += line;
    }
    out += "\n";
  }
  return out;
}

}  // namespace ttafuse
