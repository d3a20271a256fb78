#pragma once

#include <vector>

#include "ga3d/camera.hpp"
#include "ga3d/common.hpp"
#include "ga3d/feature_map.hpp"

namespace ga3d {

/// Small dense row-major matrix (the mixing weights of the sampling block).
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int rows_, int cols_) : rows(rows_), cols(cols_) {
    if (rows_ <= 0 || cols_ <= 0) throw ShapeError("Matrix dims must be positive");
    data.assign(static_cast<std::size_t>(rows_) * cols_, 0.0);
  }
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols + c];
  }

  /// channels x (channels + 1) matrix passing sampled features through
  /// unchanged and dropping the sampled prior channel.
  static Matrix identity_mixing(int channels);
};

/// Vertical sampling offsets in feature-grid units. The base component is a
/// pure function of the row; the residual varies per pixel and may be
/// negative. total = base[r] + residual[r, c].
struct OffsetField {
  int rows = 0;
  int cols = 0;
  std::vector<double> base;      // size rows
  std::vector<double> residual;  // size rows * cols

  static OffsetField zero(int rows, int cols);
  static OffsetField from_base(std::vector<double> base, int cols);

  double total(int r, int c) const {
    return base[r] + residual[static_cast<std::size_t>(r) * cols + c];
  }
  void validate() const;
};

/// Geometric downward-offset prior per feature row, in grid units:
/// max(0, h / (2 * elevation - h) * (v_r - cy)) / stride at row centers
/// v_r = (r + 0.5) * stride. `object_height` must lie in (0, 2 * elevation).
std::vector<double> base_offsets(int rows, int stride,
                                 const CameraIntrinsics& intr,
                                 const GroundModel& ground,
                                 double object_height);

/// Ground-aware sampling block. Every output pixel keeps its identity value
/// and adds a linear mix of the feature/prior columns sampled `offset` rows
/// below it (1D linear interpolation, border clamped):
///
///   out[ch] = features[ch] + sum_k mixing[ch][k] * sampled[k]
///
/// where sampled stacks the offset-shifted feature channels and the
/// offset-shifted prior as channel `channels`.
FeatureMap gac_forward(const FeatureMap& features, const FeatureMap& prior,
                       const OffsetField& offsets, const Matrix& mixing);

struct GacGradients {
  FeatureMap features;
  FeatureMap prior;
  std::vector<double> residual;  // rows * cols, matches OffsetField::residual
  Matrix mixing;
};

/// Exact analytic gradients of gac_forward. Offset gradients use the
/// left-continuous convention: at an exact integer offset the derivative is
/// taken from the lower interpolation cell, and it vanishes wherever the
/// sampling position is clamped at the grid border.
GacGradients gac_backward(const FeatureMap& upstream,
                          const FeatureMap& features, const FeatureMap& prior,
                          const OffsetField& offsets, const Matrix& mixing);

}  // namespace ga3d
