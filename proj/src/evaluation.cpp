#include "ga3d/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>

#include "ga3d/common.hpp"

namespace ga3d {

const char* to_string(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return "easy";
    case Difficulty::moderate: return "moderate";
    case Difficulty::hard: return "hard";
  }
  return "?";
}

const char* to_string(Criterion c) {
  switch (c) {
    case Criterion::box2d: return "2D";
    case Criterion::bev: return "BEV";
    case Criterion::box3d: return "3D";
  }
  return "?";
}

std::array<bool, 3> assign_difficulty(const LabelRecord& gt) {
  std::array<bool, 3> eligible{false, false, false};
  if (gt.is_dontcare()) return eligible;
  const double height = gt.bbox2d.height();
  for (int d = 0; d < 3; ++d) {
    eligible[d] = height >= kMinHeight[d] && gt.occlusion <= kMaxOcclusion[d] &&
                  gt.truncation <= kMaxTruncation[d];
  }
  return eligible;
}

namespace {

double criterion_iou(const Detection& det, const LabelRecord& gt, Criterion c) {
  switch (c) {
    case Criterion::box2d: return iou_2d(det.box2d, gt.bbox2d);
    case Criterion::bev: return iou_bev(det.box3d, gt.box3d());
    case Criterion::box3d: return iou_3d(det.box3d, gt.box3d());
  }
  return 0;
}

/// DontCare regions absorb detections by intersection over detection area.
double dontcare_overlap(const Box2D& det, const Box2D& region) {
  const double iw = std::min(det.right, region.right) - std::max(det.left, region.left);
  const double ih = std::min(det.bottom, region.bottom) - std::max(det.top, region.top);
  const double inter = std::max(0.0, iw) * std::max(0.0, ih);
  const double area = det.area();
  return area > 0 ? inter / area : 0.0;
}

}  // namespace

FrameMatch match_frame(const FrameDetections& detections,
                       std::span<const LabelRecord> ground_truth,
                       const std::string& category, Criterion criterion,
                       Difficulty difficulty, double iou_threshold) {
  const int d = static_cast<int>(difficulty);

  std::vector<int> eligible, ignored, dontcare;
  for (int g = 0; g < static_cast<int>(ground_truth.size()); ++g) {
    const LabelRecord& gt = ground_truth[g];
    if (gt.is_dontcare()) {
      dontcare.push_back(g);
    } else if (gt.category == category) {
      if (assign_difficulty(gt)[d]) {
        eligible.push_back(g);
      } else {
        ignored.push_back(g);
      }
    }
  }

  std::vector<int> order;
  for (int i = 0; i < static_cast<int>(detections.size()); ++i) {
    if (detections[i].category == category) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return detections[a].score > detections[b].score;  // ties keep input order
  });

  FrameMatch match;
  match.num_gt = static_cast<long>(eligible.size());
  std::vector<bool> taken(ground_truth.size(), false);
  for (int i : order) {
    const Detection& det = detections[i];
    int best_gt = -1;
    double best_iou = -1.0;
    for (int g : eligible) {
      if (taken[g]) continue;
      const double iou = criterion_iou(det, ground_truth[g], criterion);
      if (iou >= iou_threshold && iou > best_iou) {  // ties: lowest gt index
        best_iou = iou;
        best_gt = g;
      }
    }
    if (best_gt >= 0) {
      taken[best_gt] = true;
      match.tp_scores.push_back(det.score);
      continue;
    }
    bool absorbed = false;
    for (int g : ignored) {
      if (criterion_iou(det, ground_truth[g], criterion) >= iou_threshold) {
        absorbed = true;
        break;
      }
    }
    if (!absorbed) {
      for (int g : dontcare) {
        if (dontcare_overlap(det.box2d, ground_truth[g].bbox2d) >= iou_threshold) {
          absorbed = true;
          break;
        }
      }
    }
    if (!absorbed) match.fp_scores.push_back(det.score);
  }
  return match;
}

PRCurve build_pr_curve(std::span<const FrameMatch> matches) {
  PRCurve curve;
  std::vector<double> tps, fps;
  for (const FrameMatch& m : matches) {
    curve.num_gt += m.num_gt;
    tps.insert(tps.end(), m.tp_scores.begin(), m.tp_scores.end());
    fps.insert(fps.end(), m.fp_scores.begin(), m.fp_scores.end());
  }
  std::sort(tps.begin(), tps.end(), std::greater<>());
  std::sort(fps.begin(), fps.end(), std::greater<>());

  std::vector<double> thresholds;
  thresholds.reserve(tps.size() + fps.size());
  thresholds.insert(thresholds.end(), tps.begin(), tps.end());
  thresholds.insert(thresholds.end(), fps.begin(), fps.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  // One PR point per distinct score: every detection scoring >= the
  // threshold is in; equal scores enter together, so permutations of
  // equal-score detections cannot change the curve.
  std::size_t tp_at = 0, fp_at = 0;
  for (double thr : thresholds) {
    while (tp_at < tps.size() && tps[tp_at] >= thr) ++tp_at;
    while (fp_at < fps.size() && fps[fp_at] >= thr) ++fp_at;
    PRPoint point;
    point.threshold = thr;
    const double denom = static_cast<double>(tp_at + fp_at);
    point.precision = denom > 0 ? tp_at / denom : 0.0;
    point.recall = curve.num_gt > 0 ? static_cast<double>(tp_at) / curve.num_gt : 0.0;
    curve.points.push_back(point);
  }
  return curve;
}

std::optional<double> average_precision(const PRCurve& curve, int positions) {
  if (positions != 11 && positions != 40)
    throw ConfigError("average_precision: positions must be 11 or 40");
  if (curve.num_gt <= 0) return std::nullopt;

  // Max precision over all curve points with recall >= r ("interpolated"
  // precision); points are in descending-threshold = ascending-recall order.
  const auto interp = [&](double r) {
    double best = 0.0;
    for (auto it = curve.points.rbegin(); it != curve.points.rend(); ++it) {
      if (it->recall < r) break;
      best = std::max(best, it->precision);
    }
    return best;
  };

  double acc = 0;
  if (positions == 40) {
    for (int k = 1; k <= 40; ++k) acc += interp(k / 40.0);
    return acc / 40.0;
  }
  for (int k = 0; k <= 10; ++k) acc += interp(k / 10.0);
  return acc / 11.0;
}

std::vector<double> EvalConfig::thresholds_for(const std::string& cls) const {
  const auto it = iou_thresholds.find(cls);
  if (it != iou_thresholds.end()) return it->second;
  return {0.5};
}

std::string MetricKey::name() const {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%s_%s_AP%d_%s_iou%.2f", category.c_str(),
                to_string(criterion), positions, to_string(difficulty),
                iou_threshold);
  return buf;
}

bool EvalReport::has_absent() const {
  return std::any_of(metrics.begin(), metrics.end(),
                     [](const auto& kv) { return !kv.second.has_value(); });
}

EvalReport evaluate_frames(std::span<const EvalFrame> frames,
                           const EvalConfig& config) {
  EvalReport report;
  report.frames = frames.size();

  struct Setting {
    std::string category;
    Criterion criterion;
    Difficulty difficulty;
    double iou;
  };
  std::vector<Setting> settings;
  for (const std::string& cls : config.classes) {
    for (double iou : config.thresholds_for(cls)) {
      for (Criterion crit : {Criterion::box2d, Criterion::bev, Criterion::box3d}) {
        for (Difficulty diff :
             {Difficulty::easy, Difficulty::moderate, Difficulty::hard}) {
          settings.push_back({cls, crit, diff, iou});
        }
      }
    }
  }

  // matches[s][f]: setting-major, frame order preserved for deterministic
  // aggregation under any jobs count.
  std::vector<std::vector<FrameMatch>> matches(
      settings.size(), std::vector<FrameMatch>(frames.size()));
  parallel_for(frames.size(), config.jobs, [&](std::size_t f) {
    for (std::size_t s = 0; s < settings.size(); ++s) {
      const Setting& st = settings[s];
      matches[s][f] = match_frame(frames[f].detections, frames[f].ground_truth,
                                  st.category, st.criterion, st.difficulty, st.iou);
    }
  });

  for (std::size_t s = 0; s < settings.size(); ++s) {
    const Setting& st = settings[s];
    const PRCurve curve = build_pr_curve(matches[s]);
    for (int positions : {40, 11}) {
      MetricKey key;
      key.category = st.category;
      key.criterion = st.criterion;
      key.positions = positions;
      key.difficulty = st.difficulty;
      key.iou_threshold = st.iou;
      report.metrics.emplace_back(key, average_precision(curve, positions));
    }
  }
  return report;
}

namespace {

std::set<std::string> frame_ids_in(const std::filesystem::path& dir) {
  std::set<std::string> ids;
  if (!std::filesystem::is_directory(dir))
    throw InputError("not a directory: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto& p = entry.path();
    if (p.extension() == ".txt") ids.insert(p.stem().string());
  }
  return ids;
}

}  // namespace

FrameDetections detections_from_labels(std::span<const LabelRecord> labels) {
  FrameDetections dets;
  dets.reserve(labels.size());
  for (const LabelRecord& r : labels) {
    if (r.is_dontcare()) continue;
    Detection d;
    d.category = r.category;
    d.box2d = r.bbox2d;
    d.box3d = r.box3d();
    d.alpha = r.alpha;
    d.score = r.score.value_or(0.0);
    dets.push_back(std::move(d));
  }
  return dets;
}

EvalReport evaluate(const std::filesystem::path& predictions_dir,
                    const std::filesystem::path& ground_truth_dir,
                    const EvalConfig& config) {
  const std::set<std::string> pred_ids = frame_ids_in(predictions_dir);
  const std::set<std::string> gt_ids = frame_ids_in(ground_truth_dir);

  // Ground truth defines the frame set. A frame without a prediction file is
  // evaluated with an empty detection set; stray prediction files are noted.
  std::vector<std::string> warnings;
  for (const std::string& id : gt_ids) {
    if (!pred_ids.count(id)) warnings.push_back("missing predictions for frame " + id);
  }
  for (const std::string& id : pred_ids) {
    if (!gt_ids.count(id)) warnings.push_back("missing ground truth for frame " + id);
  }

  const std::vector<std::string> ids(gt_ids.begin(), gt_ids.end());
  std::vector<EvalFrame> frames(ids.size());
  parallel_for(ids.size(), config.jobs, [&](std::size_t i) {
    EvalFrame frame;
    frame.id = ids[i];
    frame.ground_truth = read_labels(ground_truth_dir / (ids[i] + ".txt"));
    if (pred_ids.count(ids[i])) {
      frame.detections = detections_from_labels(
          read_labels(predictions_dir / (ids[i] + ".txt")));
    }
    frames[i] = std::move(frame);
  });

  EvalReport report = evaluate_frames(frames, config);
  report.warnings = std::move(warnings);
  return report;
}

void write_report_text(const EvalReport& report, std::ostream& out) {
  out << "frames evaluated: " << report.frames << '\n';
  for (const std::string& w : report.warnings) out << "warning: " << w << '\n';
  char buf[160];
  for (const auto& [key, value] : report.metrics) {
    if (value) {
      std::snprintf(buf, sizeof(buf), "%-40s %10.6f", key.name().c_str(), *value);
    } else {
      std::snprintf(buf, sizeof(buf), "%-40s %10s", key.name().c_str(), "n/a");
    }
    out << buf << '\n';
  }
}

void write_report_kv(const EvalReport& report, std::ostream& out) {
  char buf[160];
  for (const auto& [key, value] : report.metrics) {
    if (!value) continue;
    std::snprintf(buf, sizeof(buf), "%s %.6f", key.name().c_str(), *value);
    out << buf << '\n';
  }
}

}  // namespace ga3d
