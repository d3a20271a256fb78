// Test-only reference implementations: Monte-Carlo IoU, brute-force PR
// enumeration, finite differences, rank correlation. Independent of the
// library code paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "ga3d/boxes.hpp"

namespace oracle {

inline bool in_footprint(const ga3d::Box3D& b, double x, double z) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double dx = x - b.x, dz = z - b.z;
  const double along = c * dx - s * dz;   // heading axis (cos, -sin)
  const double across = s * dx + c * dz;  // lateral axis (sin, cos)
  return std::abs(along) <= 0.5 * b.l && std::abs(across) <= 0.5 * b.w;
}

/// Monte-Carlo BEV IoU over the union's bounding rectangle.
inline double mc_iou_bev(const ga3d::Box3D& a, const ga3d::Box3D& b,
                         std::size_t samples, std::uint64_t seed) {
  const double ra = 0.5 * std::hypot(a.l, a.w);
  const double rb = 0.5 * std::hypot(b.l, b.w);
  const double x0 = std::min(a.x - ra, b.x - rb), x1 = std::max(a.x + ra, b.x + rb);
  const double z0 = std::min(a.z - ra, b.z - rb), z1 = std::max(a.z + ra, b.z + rb);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(x0, x1), uz(z0, z1);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double x = ux(rng), z = uz(rng);
    const bool ia = in_footprint(a, x, z), ib = in_footprint(b, x, z);
    inter += (ia && ib) ? 1 : 0;
    uni += (ia || ib) ? 1 : 0;
  }
  return uni > 0 ? static_cast<double>(inter) / uni : 0.0;
}

/// Monte-Carlo volume IoU; boxes span [y - h, y] vertically.
inline double mc_iou_3d(const ga3d::Box3D& a, const ga3d::Box3D& b,
                        std::size_t samples, std::uint64_t seed) {
  const double ra = 0.5 * std::hypot(a.l, a.w);
  const double rb = 0.5 * std::hypot(b.l, b.w);
  const double x0 = std::min(a.x - ra, b.x - rb), x1 = std::max(a.x + ra, b.x + rb);
  const double z0 = std::min(a.z - ra, b.z - rb), z1 = std::max(a.z + ra, b.z + rb);
  const double y0 = std::min(a.y - a.h, b.y - b.h), y1 = std::max(a.y, b.y);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1), uz(z0, z1);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double x = ux(rng), y = uy(rng), z = uz(rng);
    const bool ia = in_footprint(a, x, z) && y <= a.y && y >= a.y - a.h;
    const bool ib = in_footprint(b, x, z) && y <= b.y && y >= b.y - b.h;
    inter += (ia && ib) ? 1 : 0;
    uni += (ia || ib) ? 1 : 0;
  }
  return uni > 0 ? static_cast<double>(inter) / uni : 0.0;
}

/// Brute-force interpolated AP from matched detections: every distinct score
/// is a threshold; precision is interpolated as the max over points whose
/// recall reaches the grid value. Sums run over ascending grid index.
inline double ap_enumeration(const std::vector<double>& tp_scores,
                             const std::vector<double>& fp_scores, long num_gt,
                             int positions) {
  std::vector<double> thresholds;
  thresholds.insert(thresholds.end(), tp_scores.begin(), tp_scores.end());
  thresholds.insert(thresholds.end(), fp_scores.begin(), fp_scores.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  struct Point {
    double precision, recall;
  };
  std::vector<Point> points;
  for (double thr : thresholds) {
    long tp = 0, fp = 0;
    for (double s : tp_scores) tp += s >= thr ? 1 : 0;
    for (double s : fp_scores) fp += s >= thr ? 1 : 0;
    if (tp + fp == 0) continue;
    points.push_back({static_cast<double>(tp) / (tp + fp),
                      static_cast<double>(tp) / num_gt});
  }
  const auto interp = [&](double r) {
    double best = 0;
    for (const Point& p : points)
      if (p.recall >= r) best = std::max(best, p.precision);
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

/// Central finite difference of a scalar function of one coordinate.
template <typename F>
double central_diff(F&& f, double x, double step = 1e-4) {
  return (f(x + step) - f(x - step)) / (2.0 * step);
}

/// |a - b| <= tol * max(1, |a|, |b|)
inline bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

/// Spearman rank correlation (average ranks for ties).
inline double spearman(const std::vector<double>& xs,
                       const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  const auto ranks = [n](const std::vector<double>& v) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * (i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(xs), ry = ranks(ys);
  const double mean = (n + 1) / 2.0;
  double num = 0, dx = 0, dy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (rx[i] - mean) * (ry[i] - mean);
    dx += (rx[i] - mean) * (rx[i] - mean);
    dy += (ry[i] - mean) * (ry[i] - mean);
  }
  return num / std::sqrt(dx * dy);
}

}  // namespace oracle
