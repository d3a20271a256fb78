#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ga3d/detections.hpp"
#include "ga3d/kitti_io.hpp"

namespace ga3d {

enum class Difficulty { easy = 0, moderate = 1, hard = 2 };
enum class Criterion { box2d = 0, bev = 1, box3d = 2 };

const char* to_string(Difficulty d);
const char* to_string(Criterion c);

/// Devkit strata: minimum 2D box height, maximum occlusion, maximum
/// truncation per difficulty. Membership nests: easy implies moderate
/// implies hard.
inline constexpr std::array<double, 3> kMinHeight = {40.0, 25.0, 25.0};
inline constexpr std::array<int, 3> kMaxOcclusion = {0, 1, 2};
inline constexpr std::array<double, 3> kMaxTruncation = {0.15, 0.30, 0.50};

/// Eligibility per difficulty; all false for DontCare records (they become
/// ignored regions instead).
std::array<bool, 3> assign_difficulty(const LabelRecord& gt);

/// Matching outcome for one frame at one (category, criterion, difficulty,
/// IoU threshold) setting. Scores feed the PR sweep; detections absorbed by
/// ignored ground truth or DontCare regions appear in neither list.
struct FrameMatch {
  std::vector<double> tp_scores;
  std::vector<double> fp_scores;
  long num_gt = 0;  // eligible ground truths
};

/// Greedy score-descending matching: each detection takes the highest-IoU
/// unmatched eligible ground truth with IoU >= threshold; failing that it is
/// absorbed by an ignored same-category ground truth (same IoU test) or a
/// DontCare region (intersection / detection area >= threshold); otherwise
/// it is a false positive. Ties break by input index.
FrameMatch match_frame(const FrameDetections& detections,
                       std::span<const LabelRecord> ground_truth,
                       const std::string& category, Criterion criterion,
                       Difficulty difficulty, double iou_threshold);

struct PRPoint {
  double threshold = 0;
  double precision = 0;
  double recall = 0;
};

/// Threshold-sweep PR curve over the pooled frame matches, one point per
/// distinct detection score, ordered by descending threshold.
struct PRCurve {
  std::vector<PRPoint> points;
  long num_gt = 0;
};

PRCurve build_pr_curve(std::span<const FrameMatch> matches);

/// Interpolated average precision: mean of max-precision-at-recall over
/// {1/40..40/40} for 40 positions (recall 0 excluded) or {0, 0.1, .., 1.0}
/// for 11. nullopt when the curve has no ground truth.
std::optional<double> average_precision(const PRCurve& curve, int positions);

struct EvalConfig {
  std::vector<std::string> classes = {"Car"};
  /// IoU thresholds per class; classes not listed fall back to {0.5}.
  std::map<std::string, std::vector<double>> iou_thresholds = {
      {"Car", {0.7, 0.5}}};
  int jobs = 1;

  std::vector<double> thresholds_for(const std::string& cls) const;
};

struct MetricKey {
  std::string category;
  Criterion criterion = Criterion::box2d;
  int positions = 40;
  Difficulty difficulty = Difficulty::easy;
  double iou_threshold = 0.7;

  /// e.g. "Car_3D_AP40_moderate_iou0.70"
  std::string name() const;
  auto operator<=>(const MetricKey&) const = default;
};

struct EvalReport {
  /// Metric -> value; nullopt where the difficulty has no ground truth.
  std::vector<std::pair<MetricKey, std::optional<double>>> metrics;
  std::vector<std::string> warnings;
  std::size_t frames = 0;

  bool has_absent() const;
};

struct EvalFrame {
  std::string id;
  FrameDetections detections;
  std::vector<LabelRecord> ground_truth;
};

EvalReport evaluate_frames(std::span<const EvalFrame> frames,
                           const EvalConfig& config);

/// Directory form: KITTI label files named <frame>.txt on both sides.
/// Evaluation proceeds on the frame-id intersection; mismatches become
/// warnings.
EvalReport evaluate(const std::filesystem::path& predictions_dir,
                    const std::filesystem::path& ground_truth_dir,
                    const EvalConfig& config);

/// Human-readable table.
void write_report_text(const EvalReport& report, std::ostream& out);
/// Machine-readable "name value" lines, six decimals, absent metrics omitted.
void write_report_kv(const EvalReport& report, std::ostream& out);

FrameDetections detections_from_labels(std::span<const LabelRecord> labels);

}  // namespace ga3d
