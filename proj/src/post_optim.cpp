#include "ga3d/post_optim.hpp"

#include <cmath>
#include <optional>

namespace ga3d {

void HillClimbConfig::validate() const {
  if (!(step_alpha > 0) || !(step_z > 0))
    throw ConfigError("hill climb: step sizes must be positive");
  if (!(shrink > 0) || !(shrink < 1))
    throw ConfigError("hill climb: shrink must lie in (0, 1)");
  if (max_iterations < 1)
    throw ConfigError("hill climb: max_iterations must be >= 1");
  if (!(epsilon > 0)) throw ConfigError("hill climb: epsilon must be positive");
}

namespace {

std::optional<double> objective(const Box3D& box, const Box2D& target,
                                const CameraIntrinsics& intr) {
  try {
    return iou_2d(target, project_box(box, intr));
  } catch (const GeometryError&) {
    return std::nullopt;  // candidate slid behind the camera
  }
}

Box3D rebuild(const Box3D& base, double alpha, double z) {
  Box3D b = base;
  b.z = z;
  b.yaw = yaw_from_alpha(alpha, b.x, z);
  return b;
}

}  // namespace

RefineResult refine(const Box3D& box3d, const Box2D& box2d,
                    const CameraIntrinsics& intr, const HillClimbConfig& cfg) {
  cfg.validate();
  const auto initial = objective(box3d, box2d, intr);
  if (!initial) throw GeometryError("refine: initial box behind camera");

  const bool with_depth = cfg.variables == RefineVariables::angle_and_depth;
  double alpha = alpha_from_yaw(box3d.yaw, box3d.x, box3d.z);
  double z = box3d.z;
  double step_a = cfg.step_alpha;
  double step_z = cfg.step_z;

  RefineResult result{box3d, *initial, 0};
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    if (step_a < cfg.epsilon && (!with_depth || step_z < cfg.epsilon)) break;

    // Fixed candidate order keeps the search deterministic.
    struct Move {
      double alpha, z;
    };
    Move candidates[4];
    int n_candidates = 0;
    candidates[n_candidates++] = {alpha + step_a, z};
    candidates[n_candidates++] = {alpha - step_a, z};
    if (with_depth) {
      candidates[n_candidates++] = {alpha, z + step_z};
      candidates[n_candidates++] = {alpha, z - step_z};
    }

    int best_move = -1;
    double best_value = result.iou;
    Box3D best_box = result.box;
    for (int m = 0; m < n_candidates; ++m) {
      if (!(candidates[m].z > 0)) continue;
      const Box3D candidate = rebuild(result.box, candidates[m].alpha, candidates[m].z);
      const auto value = objective(candidate, box2d, intr);
      if (value && *value > best_value) {
        best_value = *value;
        best_move = m;
        best_box = candidate;
      }
    }

    if (best_move >= 0) {
      alpha = candidates[best_move].alpha;
      z = candidates[best_move].z;
      result.box = best_box;
      result.iou = best_value;
      ++result.accepted_moves;
    } else {
      step_a *= cfg.shrink;
      step_z *= cfg.shrink;
    }
  }
  return result;
}

std::pair<FrameDetections, RefineSetStats> refine_set(
    const FrameDetections& detections, const CameraIntrinsics& intr,
    const HillClimbConfig& cfg) {
  cfg.validate();
  FrameDetections out = detections;
  RefineSetStats stats;
  double before = 0, after = 0;
  for (Detection& det : out) {
    try {
      const double initial = iou_2d(det.box2d, project_box(det.box3d, intr));
      const RefineResult r = refine(det.box3d, det.box2d, intr, cfg);
      if (r.accepted_moves > 0) {
        det.box3d = r.box;
        det.alpha = alpha_from_yaw(r.box.yaw, r.box.x, r.box.z);
      }
      before += initial;
      after += r.iou;
      ++stats.refined;
    } catch (const GeometryError&) {
      ++stats.skipped;  // passed through unmodified
    }
  }
  if (stats.refined > 0) {
    stats.mean_iou_before = before / stats.refined;
    stats.mean_iou_after = after / stats.refined;
  }
  return {std::move(out), stats};
}

}  // namespace ga3d
