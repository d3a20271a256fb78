#pragma once

#include <utility>

#include "ga3d/boxes.hpp"
#include "ga3d/camera.hpp"
#include "ga3d/common.hpp"
#include "ga3d/detections.hpp"

namespace ga3d {

enum class RefineVariables { angle_only, angle_and_depth };

struct HillClimbConfig {
  RefineVariables variables = RefineVariables::angle_only;
  double step_alpha = 0.1;  // radians
  double step_z = 0.5;      // meters
  double shrink = 0.5;
  int max_iterations = 50;
  double epsilon = 1e-6;  // step underflow threshold

  void validate() const;
};

struct RefineResult {
  Box3D box;
  double iou = 0;
  int accepted_moves = 0;
};

/// Coordinate-descent hill climbing on the observation angle (and depth when
/// enabled), maximizing the 2D IoU between `box2d` and the projection of the
/// 3D box. Candidate order is fixed (+a, -a, +z, -z); a move is accepted only
/// on strict improvement, otherwise every active step shrinks. Deterministic;
/// the returned IoU never falls below the initial one, and with zero accepted
/// moves the input box is returned bit-identical.
RefineResult refine(const Box3D& box3d, const Box2D& box2d,
                    const CameraIntrinsics& intr, const HillClimbConfig& cfg);

struct RefineSetStats {
  std::size_t refined = 0;
  std::size_t skipped = 0;  // behind-camera inputs passed through unmodified
  double mean_iou_before = 0;
  double mean_iou_after = 0;
};

/// refine() applied independently to every detection; order and scores are
/// preserved.
std::pair<FrameDetections, RefineSetStats> refine_set(
    const FrameDetections& detections, const CameraIntrinsics& intr,
    const HillClimbConfig& cfg);

}  // namespace ga3d
