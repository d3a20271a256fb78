#include "ga3d/camera.hpp"

#include <algorithm>

namespace ga3d {

Pixel project(const Point3& p, const CameraIntrinsics& intr) {
  if (!(p.z > 0)) throw GeometryError("project: depth must be positive");
  return {intr.fx * p.x / p.z + intr.cx,
          (intr.fy * p.y + intr.ty) / p.z + intr.cy};
}

Point3 backproject(double u, double v, double z, const CameraIntrinsics& intr,
                   BackprojectMode mode) {
  if (!(z > 0)) throw GeometryError("backproject: depth must be positive");
  const double x = (u - intr.cx) / intr.fx * z;
  double y = (v - intr.cy) / intr.fy * z;
  if (mode == BackprojectMode::exact) y -= intr.ty / intr.fy;
  return {x, y, z};
}

std::optional<double> ground_depth(double v, const CameraIntrinsics& intr,
                                   const GroundModel& ground) {
  if (!(v > intr.cy)) return std::nullopt;  // vanishing line and above
  return (intr.fy * ground.elevation + intr.ty) / (v - intr.cy);
}

double virtual_disparity(double v, const CameraIntrinsics& intr,
                         const GroundModel& ground) {
  const double d = intr.fy * ground.virtual_baseline * (v - intr.cy) /
                   (intr.fy * ground.elevation + intr.ty);
  return std::max(0.0, d);
}

FeatureMap depth_prior_map(const CameraIntrinsics& intr,
                           const GroundModel& ground, int stride, int rows,
                           int cols) {
  if (stride < 1) throw ConfigError("depth_prior_map: stride must be >= 1");
  FeatureMap map(1, rows, cols);
  for (int r = 0; r < rows; ++r) {
    const double v = (r + 0.5) * stride;
    const double d = virtual_disparity(v, intr, ground);
    for (int c = 0; c < cols; ++c) map.at(0, r, c) = d;
  }
  return map;
}

}  // namespace ga3d
