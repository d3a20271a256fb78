#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "ga3d/anchors.hpp"
#include "ga3d/camera.hpp"
#include "ga3d/config.hpp"
#include "ga3d/evaluation.hpp"
#include "ga3d/kitti_io.hpp"
#include "ga3d/post_optim.hpp"

namespace fs = std::filesystem;
using namespace ga3d;

namespace {

/// CLI flags are collected as (config key, value) pairs and replayed over the
/// file configuration, so flags and file share one parser and precedence is
/// defaults < file < flags.
struct Overrides {
  std::vector<std::pair<std::string, std::string>> entries;

  void bind(CLI::App* cmd, const std::string& flag, const std::string& key,
            const std::string& help) {
    cmd->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { entries.emplace_back(key, v); },
        help);
  }
};

void bind_common(CLI::App* cmd, Overrides& ov, std::string& config_path) {
  cmd->add_option("--config", config_path, "key = value configuration file");
  ov.bind(cmd, "--data-root", "data_root", "dataset root (calib/, label_2/)");
  ov.bind(cmd, "--split", "split", "frame id list, one per line");
  ov.bind(cmd, "--out", "out_dir", "output directory");
  ov.bind(cmd, "--jobs", "jobs", "worker threads (0 = all cores)");
  ov.bind(cmd, "--image-w", "image_w", "working image width");
  ov.bind(cmd, "--image-h", "image_h", "working image height (after crop)");
  ov.bind(cmd, "--crop-rows", "crop_rows", "rows cropped off the top");
  ov.bind(cmd, "--camera", "camera", "projection key, default P2");
  ov.bind(cmd, "--stride", "stride", "feature stride");
  ov.bind(cmd, "--scales", "scales", "anchor scales, comma separated");
  ov.bind(cmd, "--ratios", "ratios", "anchor aspect ratios, comma separated");
  ov.bind(cmd, "--iou-stats", "iou_stats", "IoU threshold for prior collection");
  ov.bind(cmd, "--iou-fg", "iou_fg", "foreground assignment threshold");
  ov.bind(cmd, "--iou-bg", "iou_bg", "background assignment threshold");
  ov.bind(cmd, "--min-support", "min_support", "matches needed for usable priors");
  ov.bind(cmd, "--ground-tolerance", "ground_tolerance",
          "anchor filter tolerance in meters ('inf' disables filtering)");
  ov.bind(cmd, "--elevation", "elevation", "camera height above ground");
  ov.bind(cmd, "--baseline", "baseline", "virtual stereo baseline");
  ov.bind(cmd, "--hc-variables", "hc_variables", "'angle' or 'angle_depth'");
  ov.bind(cmd, "--hc-step-alpha", "hc_step_alpha", "initial angle step (rad)");
  ov.bind(cmd, "--hc-step-z", "hc_step_z", "initial depth step (m)");
  ov.bind(cmd, "--hc-shrink", "hc_shrink", "step shrink factor");
  ov.bind(cmd, "--hc-max-iter", "hc_max_iter", "hill-climb iteration cap");
  ov.bind(cmd, "--hc-epsilon", "hc_epsilon", "step underflow threshold");
  ov.bind(cmd, "--eval-classes", "eval_classes", "classes to evaluate");
  ov.bind(cmd, "--eval-ious", "eval_ious", "Car IoU thresholds");
}

RunConfig resolve_config(const std::string& config_path, const Overrides& ov) {
  RunConfig cfg;
  if (!config_path.empty()) cfg = load_config(config_path);
  for (const auto& [key, value] : ov.entries) apply_config_line(cfg, key, value);
  cfg.validate();
  return cfg;
}

struct SplitFrame {
  std::string id;
  fs::path calib_path;
  fs::path label_path;
};

std::vector<SplitFrame> resolve_split(const RunConfig& cfg, bool need_labels) {
  if (cfg.split.empty()) throw ConfigError("missing --split");
  if (cfg.data_root.empty()) throw ConfigError("missing --data-root");
  const auto ids = read_split(cfg.split);
  if (ids.empty()) throw InputError("empty split: " + cfg.split.string());

  std::vector<SplitFrame> frames;
  std::vector<std::string> missing;
  for (const std::string& id : ids) {
    SplitFrame f;
    f.id = id;
    f.calib_path = cfg.data_root / "calib" / (id + ".txt");
    f.label_path = cfg.data_root / "label_2" / (id + ".txt");
    if (!fs::exists(f.calib_path)) missing.push_back(f.calib_path.string());
    if (need_labels && !fs::exists(f.label_path))
      missing.push_back(f.label_path.string());
    frames.push_back(std::move(f));
  }
  if (!missing.empty()) {
    std::string msg = "missing input files:";
    for (const std::string& m : missing) msg += "\n  " + m;
    throw InputError(msg);
  }
  return frames;
}

fs::path require_out_dir(const RunConfig& cfg) {
  if (cfg.out_dir.empty()) throw ConfigError("missing --out");
  fs::create_directories(cfg.out_dir);
  return cfg.out_dir;
}

/// Training-space view of one frame: calibration and labels after the
/// configured top crop.
FrameGroundTruth load_cropped(const RunConfig& cfg, const SplitFrame& frame) {
  const CalibrationFile calib = read_calibration(frame.calib_path);
  const auto labels = read_labels(frame.label_path);
  auto [cropped_calib, cropped_labels] = crop_top(calib, labels, cfg.crop_rows);
  return {std::move(cropped_labels), std::move(cropped_calib)};
}

int cmd_stats(const RunConfig& cfg) {
  const auto split = resolve_split(cfg, true);
  const fs::path out_dir = require_out_dir(cfg);

  std::vector<FrameGroundTruth> corpus(split.size());
  parallel_for(split.size(), cfg.jobs,
               [&](std::size_t i) { corpus[i] = load_cropped(cfg, split[i]); });

  const CameraIntrinsics intr = intrinsics_from_calibration(
      corpus.front().calib, cfg.camera, cfg.image_w, cfg.image_h);
  const AnchorGrid grid = build_grid(intr, cfg.stride, cfg.scales, cfg.ratios);
  const AnchorStats stats =
      collect_stats(grid, corpus, cfg.iou_stats, cfg.jobs, cfg.min_support);

  const fs::path stats_path = out_dir / "anchor_stats.txt";
  {
    std::ofstream out(stats_path);
    if (!out) throw InputError("cannot write " + stats_path.string());
    write_anchor_stats(grid.shapes, stats, out);
  }
  std::cerr << "wrote " << stats_path.string() << "\n";

  std::printf("%10s %10s %8s %12s %12s %12s %12s\n", "w2d", "h2d", "count",
              "mean_z", "var_z", "mean_sin", "mean_cos");
  for (std::size_t s = 0; s < grid.shapes.size(); ++s) {
    const ShapeStats& st = stats.shapes[s];
    std::printf("%10.3f %10.3f %8ld %12.4f %12.4f %12.4f %12.4f\n",
                grid.shapes[s].w2d, grid.shapes[s].h2d, st.count, st.mean_z,
                st.var_z, st.mean_sin, st.mean_cos);
  }
  return 0;
}

int cmd_filter_audit(const RunConfig& cfg, const fs::path& stats_path) {
  const auto split = resolve_split(cfg, false);
  auto [shapes, stats] = [&] {
    std::ifstream in(stats_path);
    if (!in) throw InputError("cannot open stats file: " + stats_path.string());
    return read_anchor_stats(in);
  }();

  CalibrationFile calib = read_calibration(split.front().calib_path);
  auto [cropped_calib, ignored] =
      crop_top(calib, std::span<const LabelRecord>{}, cfg.crop_rows);
  const CameraIntrinsics intr = intrinsics_from_calibration(
      cropped_calib, cfg.camera, cfg.image_w, cfg.image_h);

  AnchorGrid grid = build_grid(intr, cfg.stride, cfg.scales, cfg.ratios);
  attach_priors(grid, shapes, std::move(stats));

  const std::vector<bool> mask =
      filter_ground(grid, intr, cfg.ground, cfg.ground_tolerance);
  const std::size_t kept =
      static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));

  std::printf("anchors total %zu\n", mask.size());
  std::printf("anchors kept  %zu\n", kept);
  std::printf("keep fraction %.6f\n",
              mask.empty() ? 0.0 : static_cast<double>(kept) / mask.size());
  const std::size_t per_row = static_cast<std::size_t>(grid.cols) * grid.shapes.size();
  for (int r = 0; r < grid.rows; ++r) {
    std::size_t row_kept = 0;
    for (std::size_t i = r * per_row; i < (r + 1) * per_row; ++i)
      row_kept += mask[i] ? 1 : 0;
    std::printf("row %3d kept %zu / %zu\n", r, row_kept, per_row);
  }
  return 0;
}

int cmd_priors(const RunConfig& cfg) {
  const auto split = resolve_split(cfg, false);
  const fs::path out_dir = require_out_dir(cfg);
  const int rows = (cfg.image_h + cfg.stride - 1) / cfg.stride;
  const int cols = (cfg.image_w + cfg.stride - 1) / cfg.stride;

  parallel_for(split.size(), cfg.jobs, [&](std::size_t i) {
    const CalibrationFile calib = read_calibration(split[i].calib_path);
    auto [cropped, ignored] =
        crop_top(calib, std::span<const LabelRecord>{}, cfg.crop_rows);
    const CameraIntrinsics intr =
        intrinsics_from_calibration(cropped, cfg.camera, cfg.image_w, cfg.image_h);
    const FeatureMap map =
        depth_prior_map(intr, cfg.ground, cfg.stride, rows, cols);
    write_raster(map, out_dir / (split[i].id + ".fmap"));
  });
  std::cerr << "wrote " << split.size() << " depth prior rasters to "
            << out_dir.string() << "\n";
  return 0;
}

int cmd_postopt(const RunConfig& cfg, const fs::path& predictions_dir) {
  const auto split = resolve_split(cfg, false);
  const fs::path out_dir = require_out_dir(cfg);

  struct FrameOutcome {
    bool ok = false;
    std::string warning;
    double before = 0, after = 0;
    std::size_t refined = 0;
  };
  std::vector<FrameOutcome> outcomes(split.size());

  parallel_for(split.size(), cfg.jobs, [&](std::size_t i) {
    FrameOutcome& outcome = outcomes[i];
    const fs::path pred_path = predictions_dir / (split[i].id + ".txt");
    std::vector<LabelRecord> records;
    try {
      records = read_labels(pred_path);
    } catch (const InputError& e) {
      outcome.warning = std::string("skipping frame ") + split[i].id + ": " + e.what();
      return;
    }
    // Predictions live in the original image space: no crop here.
    const CameraIntrinsics intr = intrinsics_from_calibration(
        read_calibration(split[i].calib_path), cfg.camera, cfg.image_w,
        cfg.image_h + cfg.crop_rows);

    for (LabelRecord& r : records) {
      if (r.is_dontcare() || !(r.z3d > 0)) continue;
      try {
        const RefineResult res = refine(r.box3d(), r.bbox2d, intr, cfg.hill_climb);
        const double initial = iou_2d(r.bbox2d, project_box(r.box3d(), intr));
        outcome.before += initial;
        outcome.after += res.iou;
        ++outcome.refined;
        if (res.accepted_moves > 0) {
          r.rotation_y = res.box.yaw;
          r.x3d = res.box.x;
          r.y3d = res.box.y;
          r.z3d = res.box.z;
          r.alpha = alpha_from_yaw(res.box.yaw, res.box.x, res.box.z);
        }
      } catch (const GeometryError&) {
        // behind camera: pass through unmodified
      }
    }
    write_labels_file(records, out_dir / (split[i].id + ".txt"));
    outcome.ok = true;
  });

  double before = 0, after = 0;
  std::size_t refined = 0;
  for (const FrameOutcome& o : outcomes) {
    if (!o.warning.empty()) std::cerr << "warning: " << o.warning << "\n";
    before += o.before;
    after += o.after;
    refined += o.refined;
  }
  if (refined > 0) {
    std::cerr << "refined " << refined << " detections; mean objective IoU "
              << before / refined << " -> " << after / refined << "\n";
  }
  return 0;
}

int cmd_eval(const RunConfig& cfg, const fs::path& predictions_dir,
             fs::path gt_dir) {
  const fs::path out_dir = require_out_dir(cfg);
  if (gt_dir.empty()) {
    if (cfg.data_root.empty()) throw ConfigError("missing --data-root or --gt");
    gt_dir = cfg.data_root / "label_2";
  }
  EvalConfig evcfg;
  evcfg.classes = cfg.eval_classes;
  evcfg.iou_thresholds.clear();
  evcfg.iou_thresholds["Car"] = cfg.eval_ious;
  evcfg.jobs = cfg.jobs;

  const EvalReport report = evaluate(predictions_dir, gt_dir, evcfg);
  for (const std::string& w : report.warnings) std::cerr << "warning: " << w << "\n";

  {
    std::ofstream out(out_dir / "report.txt");
    write_report_text(report, out);
  }
  {
    std::ofstream out(out_dir / "metrics.txt");
    write_report_kv(report, out);
  }
  write_report_text(report, std::cout);
  if (report.has_absent()) {
    std::cerr << "error: some requested metrics have no ground truth\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ground-aware monocular 3D detection toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;
  std::string stats_file, predictions_dir, gt_dir;

  CLI::App* stats = app.add_subcommand("stats", "collect per-shape anchor priors");
  bind_common(stats, ov, config_path);

  CLI::App* audit =
      app.add_subcommand("filter-audit", "report the ground-filter keep mask");
  bind_common(audit, ov, config_path);
  audit->add_option("--stats", stats_file, "anchor stats file")->required();

  CLI::App* priors = app.add_subcommand("priors", "export depth prior rasters");
  bind_common(priors, ov, config_path);

  CLI::App* postopt =
      app.add_subcommand("postopt", "hill-climb refinement of predictions");
  bind_common(postopt, ov, config_path);
  postopt->add_option("--predictions", predictions_dir, "prediction directory")
      ->required();

  CLI::App* eval = app.add_subcommand("eval", "AP evaluation of predictions");
  bind_common(eval, ov, config_path);
  eval->add_option("--predictions", predictions_dir, "prediction directory")
      ->required();
  eval->add_option("--gt", gt_dir, "ground-truth directory (default label_2/)");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = resolve_config(config_path, ov);
    if (stats->parsed()) return cmd_stats(cfg);
    if (audit->parsed()) return cmd_filter_audit(cfg, stats_file);
    if (priors->parsed()) return cmd_priors(cfg);
    if (postopt->parsed()) return cmd_postopt(cfg, predictions_dir);
    if (eval->parsed()) return cmd_eval(cfg, predictions_dir, gt_dir);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
