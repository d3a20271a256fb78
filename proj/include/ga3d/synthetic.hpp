#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ga3d/camera.hpp"
#include "ga3d/kitti_io.hpp"

namespace ga3d {

/// Counter-based deterministic generator: draw k of stream s is
/// splitmix64_mix(s + k). Streams are decorrelated by hashing (seed, frame),
/// so frames can be generated in any order or in parallel with identical
/// output.
struct CounterRng {
  std::uint64_t stream = 0;
  std::uint64_t counter = 0;

  CounterRng(std::uint64_t seed, std::uint64_t frame_index);

  std::uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  int uniform_int(int lo, int hi);       // inclusive
  double normal(double mean, double stddev);  // Box-Muller, cosine branch
};

/// Per-class 3D dimension distribution (meters).
struct ClassDims {
  std::string category = "Car";
  double mean_h = 1.53, std_h = 0.10;
  double mean_w = 1.63, std_w = 0.10;
  double mean_l = 3.88, std_l = 0.40;
};

/// Scene recipe: objects rest exactly on the ground plane (bottom face at
/// y = elevation) inside the stated depth/lateral ranges.
struct SceneSpec {
  std::uint64_t seed = 1;
  int min_objects = 1;
  int max_objects = 8;
  double min_depth = 8.0;
  double max_depth = 45.0;
  double min_lateral = -12.0;
  double max_lateral = 12.0;
  double min_yaw = -kPi;
  double max_yaw = kPi;
  std::vector<ClassDims> classes = {ClassDims{}};
  CameraIntrinsics camera{720.0, 720.0, 640.0, 95.0, 0.0, 1280, 288};
  GroundModel ground{};
  int max_retries = 64;  // per object; exhausted draws are dropped

  void validate() const;
};

struct SyntheticFrame {
  CalibrationFile calib;
  std::vector<LabelRecord> labels;
};

/// Deterministic in (spec.seed, frame_index). Every label satisfies
/// bbox2d == project_box(box3d) and alpha == alpha_from_yaw(yaw, x, z);
/// truncation is the clipped-area fraction of the projected hull.
SyntheticFrame generate_frame(const SceneSpec& spec, int frame_index);
std::vector<SyntheticFrame> generate(const SceneSpec& spec, int frames);

/// Writes frames as <root>/calib/NNNNNN.txt and <root>/label_2/NNNNNN.txt.
void write_dataset(const std::vector<SyntheticFrame>& frames,
                   const std::filesystem::path& root);

}  // namespace ga3d
