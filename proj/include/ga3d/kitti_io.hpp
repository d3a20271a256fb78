#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ga3d/boxes.hpp"
#include "ga3d/camera.hpp"
#include "ga3d/common.hpp"

namespace ga3d {

using Mat34 = std::array<double, 12>;  // row-major 3x4
using Mat33 = std::array<double, 9>;   // row-major 3x3

/// Parsed KITTI calibration file. Recognized keys keep their shape; anything
/// else is preserved verbatim in `extras` so write(parse(x)) loses nothing.
struct CalibrationFile {
  std::map<std::string, Mat34> projections;  // "P0".."P3"
  std::optional<Mat33> rectification;        // R0_rect
  std::optional<Mat34> velo_to_cam;          // Tr_velo_to_cam
  std::vector<std::pair<std::string, std::vector<double>>> extras;

  bool operator==(const CalibrationFile&) const = default;
};

/// One KITTI label/prediction line. `category == "DontCare"` marks an
/// ignored region; those records may carry negative sentinel geometry.
struct LabelRecord {
  std::string category;
  double truncation = 0;
  int occlusion = 0;
  double alpha = 0;
  Box2D bbox2d{};
  double h3d = 0, w3d = 0, l3d = 0;
  double x3d = 0, y3d = 0, z3d = 0;
  double rotation_y = 0;
  std::optional<double> score;

  bool is_dontcare() const { return category == "DontCare"; }
  Box3D box3d() const { return Box3D{x3d, y3d, z3d, w3d, h3d, l3d, rotation_y}; }
};

CalibrationFile parse_calibration(std::istream& in);
CalibrationFile parse_calibration_text(const std::string& text);
CalibrationFile read_calibration(const std::filesystem::path& path);
void write_calibration(const CalibrationFile& calib, std::ostream& out);
std::string calibration_to_text(const CalibrationFile& calib);

/// Extracts fx = P[0][0], fy = P[1][1], cx = P[0][2], cy = P[1][2],
/// ty = P[1][3] for the named camera. The calibration file does not carry
/// the image size, so the caller supplies it.
CameraIntrinsics intrinsics_from_calibration(const CalibrationFile& calib,
                                             const std::string& camera,
                                             int image_w, int image_h);

std::vector<LabelRecord> parse_labels(std::istream& in);
std::vector<LabelRecord> parse_labels_text(const std::string& text);
std::vector<LabelRecord> read_labels(const std::filesystem::path& path);

/// Canonical writer: geometry at two decimals (devkit style), score at six.
/// parse(write(r)) is a fixpoint after one round.
void write_labels(std::span<const LabelRecord> labels, std::ostream& out);
std::string labels_to_text(std::span<const LabelRecord> labels);
void write_labels_file(std::span<const LabelRecord> labels,
                       const std::filesystem::path& path);

/// Mirrors labels and calibration about the vertical image centerline:
/// x' = W - 1 - x on 2D edges and principal points, x3d negated,
/// rotation_y -> normalize(pi - rotation_y), alpha re-derived. Involutive.
std::pair<std::vector<LabelRecord>, CalibrationFile> flip_horizontal(
    std::span<const LabelRecord> labels, const CalibrationFile& calib,
    int image_width);

/// Removes `crop_rows` rows from the top: cy shifts down, 2D boxes shift and
/// clamp at zero, 3D geometry untouched.
std::pair<CalibrationFile, std::vector<LabelRecord>> crop_top(
    const CalibrationFile& calib, std::span<const LabelRecord> labels,
    int crop_rows);

/// Zero-padded 6-digit frame id, e.g. 42 -> "000042".
std::string frame_name(int frame_id);

/// Frame ids from a newline-separated split file, in file order.
std::vector<std::string> read_split(const std::filesystem::path& path);

}  // namespace ga3d
