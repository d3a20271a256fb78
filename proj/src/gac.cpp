#include "ga3d/gac.hpp"

#include <algorithm>
#include <cmath>

namespace ga3d {

Matrix Matrix::identity_mixing(int channels) {
  Matrix m(channels, channels + 1);
  for (int c = 0; c < channels; ++c) m.at(c, c) = 1.0;
  return m;
}

OffsetField OffsetField::zero(int rows, int cols) {
  OffsetField f;
  f.rows = rows;
  f.cols = cols;
  f.base.assign(rows, 0.0);
  f.residual.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  return f;
}

OffsetField OffsetField::from_base(std::vector<double> base, int cols) {
  OffsetField f;
  f.rows = static_cast<int>(base.size());
  f.cols = cols;
  f.base = std::move(base);
  f.residual.assign(static_cast<std::size_t>(f.rows) * cols, 0.0);
  return f;
}

void OffsetField::validate() const {
  if (rows <= 0 || cols <= 0 || base.size() != static_cast<std::size_t>(rows) ||
      residual.size() != static_cast<std::size_t>(rows) * cols)
    throw ShapeError("OffsetField: inconsistent sizes");
}

std::vector<double> base_offsets(int rows, int stride,
                                 const CameraIntrinsics& intr,
                                 const GroundModel& ground,
                                 double object_height) {
  if (rows <= 0 || stride < 1) throw ShapeError("base_offsets: bad grid");
  if (!(object_height > 0) || !(object_height < 2.0 * ground.elevation))
    throw ConfigError("base_offsets: object height must lie in (0, 2*elevation)");
  const double coeff = object_height / (2.0 * ground.elevation - object_height);
  std::vector<double> offsets(rows);
  for (int r = 0; r < rows; ++r) {
    const double v = (r + 0.5) * stride;
    offsets[r] = std::max(0.0, coeff * (v - intr.cy)) / stride;
  }
  return offsets;
}

namespace {

void check_shapes(const FeatureMap& features, const FeatureMap& prior,
                  const OffsetField& offsets, const Matrix& mixing) {
  offsets.validate();
  if (prior.channels != 1) throw ShapeError("gac: prior must be single-channel");
  if (prior.rows != features.rows || prior.cols != features.cols)
    throw ShapeError("gac: prior/features grid mismatch");
  if (offsets.rows != features.rows || offsets.cols != features.cols)
    throw ShapeError("gac: offsets/features grid mismatch");
  if (mixing.rows != features.channels || mixing.cols != features.channels + 1)
    throw ShapeError("gac: mixing must be channels x (channels + 1)");
}

struct SampleCell {
  int lo = 0;
  int hi = 0;
  double frac = 0;        // value = (1 - frac) * X[lo] + frac * X[hi]
  int dlo = -1;           // derivative cell; -1 where clamped
  double dsign = 0;       // d(value)/d(offset); +1 via X[dlo + 1] - X[dlo]
};

/// Interpolation weights for sampling position r + offset, border clamped.
/// The derivative uses the left-continuous cell: at an exact interior
/// integer it is taken from below, and it vanishes in the clamped regions.
SampleCell resolve(int r, double offset, int rows) {
  SampleCell cell;
  const double raw = r + offset;
  const double pos = std::clamp(raw, 0.0, rows - 1.0);
  cell.lo = static_cast<int>(std::floor(pos));
  cell.lo = std::clamp(cell.lo, 0, rows - 1);
  cell.hi = std::min(cell.lo + 1, rows - 1);
  cell.frac = pos - cell.lo;
  if (rows >= 2 && raw > 0.0 && raw <= rows - 1.0) {
    const double lower = std::ceil(raw) - 1.0;
    cell.dlo = std::clamp(static_cast<int>(lower), 0, rows - 2);
    cell.dsign = 1.0;
  }
  return cell;
}

}  // namespace

FeatureMap gac_forward(const FeatureMap& features, const FeatureMap& prior,
                       const OffsetField& offsets, const Matrix& mixing) {
  check_shapes(features, prior, offsets, mixing);
  const int C = features.channels, R = features.rows, W = features.cols;
  FeatureMap out(C, R, W);
  std::vector<double> sampled(C + 1);
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < W; ++c) {
      const SampleCell cell = resolve(r, offsets.total(r, c), R);
      for (int ch = 0; ch < C; ++ch) {
        sampled[ch] = (1.0 - cell.frac) * features.at(ch, cell.lo, c) +
                      cell.frac * features.at(ch, cell.hi, c);
      }
      sampled[C] = (1.0 - cell.frac) * prior.at(0, cell.lo, c) +
                   cell.frac * prior.at(0, cell.hi, c);
      for (int ch = 0; ch < C; ++ch) {
        double acc = features.at(ch, r, c);  // identity path
        for (int k = 0; k <= C; ++k) acc += mixing.at(ch, k) * sampled[k];
        out.at(ch, r, c) = acc;
      }
    }
  }
  return out;
}

GacGradients gac_backward(const FeatureMap& upstream,
                          const FeatureMap& features, const FeatureMap& prior,
                          const OffsetField& offsets, const Matrix& mixing) {
  check_shapes(features, prior, offsets, mixing);
  if (!upstream.same_shape(features))
    throw ShapeError("gac_backward: upstream/features shape mismatch");
  const int C = features.channels, R = features.rows, W = features.cols;

  GacGradients grads;
  grads.features = FeatureMap(C, R, W);
  grads.prior = FeatureMap(1, R, W);
  grads.residual.assign(static_cast<std::size_t>(R) * W, 0.0);
  grads.mixing = Matrix(C, C + 1);

  std::vector<double> sampled(C + 1);
  std::vector<double> gs(C + 1);
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < W; ++c) {
      const SampleCell cell = resolve(r, offsets.total(r, c), R);
      for (int ch = 0; ch < C; ++ch) {
        sampled[ch] = (1.0 - cell.frac) * features.at(ch, cell.lo, c) +
                      cell.frac * features.at(ch, cell.hi, c);
      }
      sampled[C] = (1.0 - cell.frac) * prior.at(0, cell.lo, c) +
                   cell.frac * prior.at(0, cell.hi, c);

      // Upstream into the sampled block through the mixing matrix.
      std::fill(gs.begin(), gs.end(), 0.0);
      for (int ch = 0; ch < C; ++ch) {
        const double g = upstream.at(ch, r, c);
        grads.features.at(ch, r, c) += g;  // identity path
        for (int k = 0; k <= C; ++k) {
          gs[k] += g * mixing.at(ch, k);
          grads.mixing.at(ch, k) += g * sampled[k];
        }
      }
      for (int ch = 0; ch < C; ++ch) {
        grads.features.at(ch, cell.lo, c) += gs[ch] * (1.0 - cell.frac);
        grads.features.at(ch, cell.hi, c) += gs[ch] * cell.frac;
      }
      grads.prior.at(0, cell.lo, c) += gs[C] * (1.0 - cell.frac);
      grads.prior.at(0, cell.hi, c) += gs[C] * cell.frac;

      if (cell.dlo >= 0) {
        double doffset = 0.0;
        for (int ch = 0; ch < C; ++ch) {
          doffset += gs[ch] * (features.at(ch, cell.dlo + 1, c) -
                               features.at(ch, cell.dlo, c));
        }
        doffset +=
            gs[C] * (prior.at(0, cell.dlo + 1, c) - prior.at(0, cell.dlo, c));
        grads.residual[static_cast<std::size_t>(r) * W + c] =
            cell.dsign * doffset;
      }
    }
  }
  return grads;
}

}  // namespace ga3d
