#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ga3d/camera.hpp"
#include "ga3d/post_optim.hpp"

namespace ga3d {

/// Toolkit run configuration. Defaults carry the standard rig values
/// (elevation 1.65 m, virtual baseline 0.54 m, stride 16, top crop 100).
struct RunConfig {
  std::filesystem::path data_root;  // expects calib/ and label_2/ beneath
  std::filesystem::path split;      // newline-separated frame ids
  std::filesystem::path out_dir;
  int jobs = 0;  // 0 = all hardware threads

  int image_w = 1280;
  int image_h = 288;
  int crop_rows = 100;
  std::string camera = "P2";

  int stride = 16;
  std::vector<double> scales = {24, 34, 48, 68, 96, 136, 192};
  std::vector<double> ratios = {0.5, 1.0, 2.0};
  double iou_stats = 0.5;
  double iou_fg = 0.5;
  double iou_bg = 0.4;
  long min_support = 10;
  double ground_tolerance = 1.0;

  GroundModel ground{};
  double object_height = 1.53;  // base-offset prior height

  HillClimbConfig hill_climb{};

  std::vector<std::string> eval_classes = {"Car"};
  std::vector<double> eval_ious = {0.7, 0.5};

  void validate() const;
};

/// "key = value" lines, '#' comments. Unknown keys are an error so typos
/// surface early.
RunConfig load_config(const std::filesystem::path& path);
void apply_config_line(RunConfig& cfg, const std::string& key,
                       const std::string& value);

std::vector<double> parse_double_list(const std::string& text);
std::vector<std::string> parse_string_list(const std::string& text);

}  // namespace ga3d
