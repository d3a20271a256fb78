#include "ga3d/boxes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace ga3d {

namespace {

struct Vec2 {
  double x = 0;
  double y = 0;
};

constexpr double kVertexEps = 1e-12;

/// CCW footprint of a box on the ground plane, in (x, z) coordinates.
/// Length runs along the heading (cos yaw, -sin yaw), width across it.
std::array<Vec2, 4> footprint(const Box3D& b) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const Vec2 u{c, -s};  // heading
  const Vec2 t{s, c};   // across
  const double hl = 0.5 * b.l, hw = 0.5 * b.w;
  const auto corner = [&](double a, double bb) {
    return Vec2{b.x + a * u.x + bb * t.x, b.z + a * u.y + bb * t.y};
  };
  return {corner(hl, hw), corner(-hl, hw), corner(-hl, -hw), corner(hl, -hw)};
}

double polygon_area(const std::vector<Vec2>& poly) {
  double acc = 0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    acc += p.x * q.y - q.x * p.y;
  }
  return 0.5 * acc;
}

/// Sutherland-Hodgman clip of `subject` against the CCW convex `clip`.
std::vector<Vec2> clip_polygon(std::vector<Vec2> subject,
                               const std::array<Vec2, 4>& clip) {
  for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const Vec2 a = clip[e];
    const Vec2 b = clip[(e + 1) % clip.size()];
    const auto inside = [&](const Vec2& p) {
      return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) >= 0;
    };
    const auto intersect = [&](const Vec2& p, const Vec2& q) {
      const double dcx = b.x - a.x, dcy = b.y - a.y;
      const double dpx = q.x - p.x, dpy = q.y - p.y;
      const double denom = dcx * dpy - dcy * dpx;
      const double t = (dcx * (a.y - p.y) - dcy * (a.x - p.x)) / denom;
      return Vec2{p.x + t * dpx, p.y + t * dpy};
    };
    std::vector<Vec2> out;
    out.reserve(subject.size() + 4);
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const Vec2& cur = subject[i];
      const Vec2& prev = subject[(i + subject.size() - 1) % subject.size()];
      const bool cur_in = inside(cur), prev_in = inside(prev);
      if (cur_in) {
        if (!prev_in) out.push_back(intersect(prev, cur));
        out.push_back(cur);
      } else if (prev_in) {
        out.push_back(intersect(prev, cur));
      }
    }
    subject = std::move(out);
  }
  // Merge near-duplicate vertices so degenerate slivers do not disturb the
  // area sum.
  std::vector<Vec2> merged;
  merged.reserve(subject.size());
  for (const Vec2& p : subject) {
    if (merged.empty() || std::abs(p.x - merged.back().x) > kVertexEps ||
        std::abs(p.y - merged.back().y) > kVertexEps) {
      merged.push_back(p);
    }
  }
  while (merged.size() > 1 &&
         std::abs(merged.front().x - merged.back().x) <= kVertexEps &&
         std::abs(merged.front().y - merged.back().y) <= kVertexEps) {
    merged.pop_back();
  }
  return merged;
}

double bev_intersection_area(const Box3D& a, const Box3D& b) {
  const auto fa = footprint(a);
  const auto fb = footprint(b);
  std::vector<Vec2> subject(fa.begin(), fa.end());
  const auto inter = clip_polygon(std::move(subject), fb);
  if (inter.size() < 3) return 0.0;
  return std::max(0.0, polygon_area(inter));
}

}  // namespace

std::array<Point3, 8> corners3d(const Box3D& box) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double hl = 0.5 * box.l, hw = 0.5 * box.w;
  std::array<Point3, 8> corners;
  int k = 0;
  for (double oy : {0.0, -box.h}) {
    for (const auto& [ol, ow] : {std::pair{hl, hw}, std::pair{-hl, hw},
                                 std::pair{-hl, -hw}, std::pair{hl, -hw}}) {
      corners[k++] = {box.x + c * ol + s * ow, box.y + oy,
                      box.z - s * ol + c * ow};
    }
  }
  return corners;
}

Box2D project_box(const Box3D& box, const CameraIntrinsics& intr) {
  const auto corners = corners3d(box);
  for (const Point3& p : corners) {
    if (!(p.z > 0)) throw GeometryError("project_box: corner behind camera");
  }
  double left = std::numeric_limits<double>::infinity();
  double top = left, right = -left, bottom = -left;
  for (const Point3& p : corners) {
    const Pixel px = project(p, intr);
    left = std::min(left, px.u);
    right = std::max(right, px.u);
    top = std::min(top, px.v);
    bottom = std::max(bottom, px.v);
  }
  const double maxu = intr.image_w - 1.0, maxv = intr.image_h - 1.0;
  return {std::clamp(left, 0.0, maxu), std::clamp(top, 0.0, maxv),
          std::clamp(right, 0.0, maxu), std::clamp(bottom, 0.0, maxv)};
}

double iou_2d(const Box2D& a, const Box2D& b) {
  const double iw = std::min(a.right, b.right) - std::max(a.left, b.left);
  const double ih = std::min(a.bottom, b.bottom) - std::max(a.top, b.top);
  const double inter = std::max(0.0, iw) * std::max(0.0, ih);
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double iou_bev(const Box3D& a, const Box3D& b) {
  const double inter = bev_intersection_area(a, b);
  const double uni = a.w * a.l + b.w * b.l - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double iou_3d(const Box3D& a, const Box3D& b) {
  // y is down and boxes are bottom-anchored: vertical span is [y - h, y].
  const double overlap =
      std::max(0.0, std::min(a.y, b.y) - std::max(a.y - a.h, b.y - b.h));
  const double inter = bev_intersection_area(a, b) * overlap;
  const double uni = a.w * a.l * a.h + b.w * b.l * b.h - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double alpha_from_yaw(double yaw, double x, double z) {
  if (!(z > 0)) throw GeometryError("alpha_from_yaw: depth must be positive");
  return normalize_angle(yaw - std::atan2(x, z));
}

double yaw_from_alpha(double alpha, double x, double z) {
  if (!(z > 0)) throw GeometryError("yaw_from_alpha: depth must be positive");
  return normalize_angle(alpha + std::atan2(x, z));
}

}  // namespace ga3d
