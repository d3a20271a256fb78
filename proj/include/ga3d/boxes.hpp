#pragma once

#include <array>

#include "ga3d/camera.hpp"
#include "ga3d/common.hpp"

namespace ga3d {

/// Axis-aligned image box in pixels.
struct Box2D {
  double left = 0;
  double top = 0;
  double right = 0;
  double bottom = 0;

  double width() const { return right - left; }
  double height() const { return bottom - top; }
  double center_x() const { return 0.5 * (left + right); }
  double center_y() const { return 0.5 * (top + bottom); }
  double area() const { return width() * height(); }
  bool valid() const { return right >= left && bottom >= top; }
};

/// Oriented 3D box, camera frame with y down. `center` is the bottom-face
/// center (KITTI location semantics); the top face sits at y - h.
struct Box3D {
  double x = 0;
  double y = 0;
  double z = 0;
  double w = 0;  // across heading
  double h = 0;  // vertical extent
  double l = 0;  // along heading
  double yaw = 0;
};

/// Eight corners of the yaw-rotated cuboid: bottom face at y, top at y - h.
std::array<Point3, 8> corners3d(const Box3D& box);

/// Axis-aligned hull of the projected corners, clamped to image bounds.
/// Throws GeometryError when any corner lies at or behind the camera.
Box2D project_box(const Box3D& box, const CameraIntrinsics& intr);

/// Intersection over union of axis-aligned boxes; 0 on empty union.
double iou_2d(const Box2D& a, const Box2D& b);

/// Top-down IoU of the two yaw-rotated footprints (convex clipping).
double iou_bev(const Box3D& a, const Box3D& b);

/// Volume IoU: footprint intersection times vertical overlap.
double iou_3d(const Box3D& a, const Box3D& b);

/// Observation angle: yaw relative to the viewing ray, alpha = yaw - atan2(x, z).
/// Requires z > 0.
double alpha_from_yaw(double yaw, double x, double z);
double yaw_from_alpha(double alpha, double x, double z);

}  // namespace ga3d
