#pragma once

#include <optional>

#include "ga3d/common.hpp"
#include "ga3d/feature_map.hpp"

namespace ga3d {

struct Point3 {
  double x = 0;
  double y = 0;
  double z = 0;
};

struct Pixel {
  double u = 0;
  double v = 0;
};

/// Pinhole parameters of a rectified camera. `ty` is the row-1 translation
/// term of the projection matrix (meter-pixels); zero for a reference camera.
struct CameraIntrinsics {
  double fx = 0;
  double fy = 0;
  double cx = 0;
  double cy = 0;
  double ty = 0;
  int image_w = 0;
  int image_h = 0;

  void validate() const {
    if (!(fx > 0) || !(fy > 0))
      throw ConfigError("focal lengths must be positive");
    if (image_w <= 0 || image_h <= 0)
      throw ConfigError("image size must be positive");
  }
};

/// Flat-ground hypothesis: camera `elevation` meters above the plane, plus
/// the baseline of the virtual stereo rig used to encode ground depth as a
/// pole-free disparity.
struct GroundModel {
  double elevation = 1.65;
  double virtual_baseline = 0.54;

  void validate() const {
    if (!(elevation > 0)) throw ConfigError("ground elevation must be positive");
    if (!(virtual_baseline > 0))
      throw ConfigError("virtual baseline must be positive");
  }
};

/// Camera-frame point (y down) to pixel. Throws GeometryError for z <= 0.
Pixel project(const Point3& p, const CameraIntrinsics& intr);

enum class BackprojectMode {
  exact,      // full inverse of project(), ty included
  ignore_ty,  // drops the ty correction
};

/// Pixel plus depth back to the camera frame. Exact mode inverts project()
/// bit-for-tolerance; ignore_ty matches the common ty-free approximation.
Point3 backproject(double u, double v, double z, const CameraIntrinsics& intr,
                   BackprojectMode mode = BackprojectMode::exact);

/// Depth of the ground plane seen at image row v. Rows at or above the
/// vanishing line (v <= cy) carry no prior and return nullopt.
std::optional<double> ground_depth(double v, const CameraIntrinsics& intr,
                                   const GroundModel& ground);

/// Ground depth re-encoded as virtual-stereo disparity, clamped at zero
/// above the vanishing line. Finite and continuous at every row.
double virtual_disparity(double v, const CameraIntrinsics& intr,
                         const GroundModel& ground);

/// 1 x rows x cols map of virtual disparity sampled at pixel-center rows
/// v = (r + 0.5) * stride; constant across columns.
FeatureMap depth_prior_map(const CameraIntrinsics& intr,
                           const GroundModel& ground, int stride, int rows,
                           int cols);

}  // namespace ga3d
