#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ga3d/boxes.hpp"
#include "ga3d/camera.hpp"
#include "ga3d/detections.hpp"
#include "ga3d/kitti_io.hpp"

namespace ga3d {

struct AnchorShape {
  double w2d = 0;
  double h2d = 0;
};

/// Mean/variance of depth and angle encoding pooled over every
/// (anchor, object) pair of one anchor shape. Population variance.
struct ShapeStats {
  long count = 0;
  double mean_z = 0, var_z = 0;
  double mean_sin = 0, var_sin = 0;
  double mean_cos = 0, var_cos = 0;
};

/// Corpus-global dimension statistics for one category.
struct DimStats {
  long count = 0;
  double mean_w = 0, std_w = 0, min_w = 0, max_w = 0;
  double mean_h = 0, std_h = 0, min_h = 0, max_h = 0;
  double mean_l = 0, std_l = 0, min_l = 0, max_l = 0;
};

/// Divisor floor when normalizing by a prior standard deviation.
inline constexpr double kStdFloor = 1e-2;

struct AnchorStats {
  std::vector<ShapeStats> shapes;          // parallel to AnchorGrid::shapes
  std::map<std::string, DimStats> classes; // per category
  long min_support = 10;

  bool usable(std::size_t shape) const {
    return shape < shapes.size() && shapes[shape].count >= min_support;
  }
};

/// Dense anchor layout over a strided feature grid. Anchor index order is
/// row-major positions, shape-minor: ((row * cols) + col) * shapes + shape.
struct AnchorGrid {
  int stride = 16;
  int rows = 0;
  int cols = 0;
  std::vector<AnchorShape> shapes;  // scale-major, ratio-minor
  std::optional<AnchorStats> priors;

  std::size_t anchor_count() const {
    return static_cast<std::size_t>(rows) * cols * shapes.size();
  }
  Pixel center(int row, int col) const {
    return {(col + 0.5) * stride, (row + 0.5) * stride};
  }
  Box2D anchor_box(int row, int col, int shape) const {
    const Pixel c = center(row, col);
    const AnchorShape& s = shapes[shape];
    return {c.u - 0.5 * s.w2d, c.v - 0.5 * s.h2d, c.u + 0.5 * s.w2d,
            c.v + 0.5 * s.h2d};
  }
  std::size_t anchor_index(int row, int col, int shape) const {
    return (static_cast<std::size_t>(row) * cols + col) * shapes.size() + shape;
  }
};

/// Shapes are every scale x ratio pair, scale-major: w = s * sqrt(ratio),
/// h = s / sqrt(ratio) (ratio = width/height). Grid covers the image:
/// rows = ceil(image_h / stride), cols = ceil(image_w / stride).
AnchorGrid build_grid(const CameraIntrinsics& intr, int stride,
                      std::span<const double> scales,
                      std::span<const double> ratios);

struct FrameGroundTruth {
  std::vector<LabelRecord> labels;
  CalibrationFile calib;
};

/// Pools depth/angle moments per anchor shape over every (anchor, object)
/// pair with 2D IoU >= iou_threshold, plus per-class dimension statistics.
/// Per-frame accumulators merge in frame order, so the result is identical
/// for any jobs count.
AnchorStats collect_stats(const AnchorGrid& grid,
                          std::span<const FrameGroundTruth> corpus,
                          double iou_threshold, int jobs = 1,
                          long min_support = 10);

/// Keep mask over anchors: an anchor at pixel center (u, v) with prior mean
/// depth m survives iff |backproject(u, v, m).y - elevation| <= tolerance.
/// Non-finite tolerance keeps everything (the unfiltered ablation); shapes
/// without usable priors are dropped otherwise.
std::vector<bool> filter_ground(const AnchorGrid& grid,
                                const CameraIntrinsics& intr,
                                const GroundModel& ground, double tolerance);

/// 12 regression values per anchor, each normalized by the anchor's priors.
struct RegressionTarget {
  double dx = 0, dy = 0, dw = 0, dh = 0;      // 2D box vs anchor box
  double dcx = 0, dcy = 0, dz = 0;            // projected 3D center + depth
  double dw3d = 0, dh3d = 0, dl3d = 0;        // dimensions vs class stats
  double dsin = 0, dcos = 0;                  // observation-angle encoding

  std::array<double, 12> to_array() const {
    return {dx, dy, dw, dh, dcx, dcy, dz, dw3d, dh3d, dl3d, dsin, dcos};
  }
  static RegressionTarget from_array(const std::array<double, 12>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8], a[9], a[10],
            a[11]};
  }
};

enum class AnchorState : std::int8_t { ignore = -1, background = 0, foreground = 1 };

struct EncodedTargets {
  std::vector<AnchorState> state;            // per anchor
  std::vector<int> matched_gt;               // per anchor, -1 when none
  std::vector<RegressionTarget> regression;  // per anchor; zeros unless fg
  std::vector<std::array<double, 3>> gt_dims;  // (w, h, l); fg anchors only
  std::vector<std::string> gt_category;        // fg anchors only (else empty)

  std::size_t foreground_count() const;
};

/// Anchor assignment and target encoding: best-IoU >= iou_fg is foreground,
/// below iou_bg background, the band between ignored. Requires grid.priors.
EncodedTargets encode_targets(const AnchorGrid& grid,
                              std::span<const LabelRecord> labels,
                              const CameraIntrinsics& intr, double iou_fg,
                              double iou_bg);

struct DecodeInput {
  std::size_t anchor_index = 0;
  RegressionTarget target{};
  double score = 0;
  std::string category = "Car";
};

/// Inverse of encode_targets for the given anchors. The decoded (sin, cos)
/// pair is renormalized before angle extraction; the 3D box comes from
/// back-projecting the decoded projected center at the decoded depth.
FrameDetections decode_targets(const AnchorGrid& grid,
                               std::span<const DecodeInput> inputs,
                               const CameraIntrinsics& intr);

/// Versioned plain-text stats table; all reals use shortest round-trip
/// decimal formatting, so write/read is lossless.
void write_anchor_stats(std::span<const AnchorShape> shapes,
                        const AnchorStats& stats, std::ostream& out);
std::pair<std::vector<AnchorShape>, AnchorStats> read_anchor_stats(
    std::istream& in);

/// Attaches stats to a grid, validating the shape table matches.
void attach_priors(AnchorGrid& grid, std::span<const AnchorShape> shapes,
                   AnchorStats stats);

}  // namespace ga3d
