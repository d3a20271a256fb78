#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "ga3d/common.hpp"

namespace ga3d {

/// Dense rank-3 numeric grid: channel-major, row-major within a channel.
struct FeatureMap {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(int channels_, int rows_, int cols_)
      : channels(channels_), rows(rows_), cols(cols_) {
    if (channels_ <= 0 || rows_ <= 0 || cols_ <= 0)
      throw ShapeError("FeatureMap dimensions must be positive");
    data.assign(static_cast<std::size_t>(channels_) * rows_ * cols_, 0.0);
  }

  std::size_t index(int c, int r, int col) const {
    return (static_cast<std::size_t>(c) * rows + r) * cols + col;
  }
  double& at(int c, int r, int col) { return data[index(c, r, col)]; }
  double at(int c, int r, int col) const { return data[index(c, r, col)]; }

  std::size_t size() const { return data.size(); }

  bool same_shape(const FeatureMap& o) const {
    return channels == o.channels && rows == o.rows && cols == o.cols;
  }
};

/// Raster file: "GAFM" magic, u32 version, u32 channels/rows/cols,
/// little-endian float64 payload in storage order.
void write_raster(const FeatureMap& map, std::ostream& out);
void write_raster(const FeatureMap& map, const std::filesystem::path& path);
FeatureMap read_raster(std::istream& in);
FeatureMap read_raster(const std::filesystem::path& path);

}  // namespace ga3d
