#include "ga3d/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "ga3d/boxes.hpp"

namespace ga3d {

namespace {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t frame_index)
    : stream(mix64(mix64(seed) ^ (frame_index + 0x6A09E667F3BCC909ULL))) {}

std::uint64_t CounterRng::next_u64() { return mix64(stream + counter++); }

double CounterRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

int CounterRng::uniform_int(int lo, int hi) {
  if (hi < lo) throw ConfigError("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi) - lo + 1;
  return lo + static_cast<int>(next_u64() % span);
}

double CounterRng::normal(double mean, double stddev) {
  const double u1 = std::max(uniform(), 0x1.0p-53);  // keep the log finite
  const double u2 = uniform();
  return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

void SceneSpec::validate() const {
  camera.validate();
  ground.validate();
  if (min_objects < 0 || max_objects < min_objects)
    throw ConfigError("scene: bad object count range");
  if (!(min_depth > 0) || !(max_depth >= min_depth))
    throw ConfigError("scene: bad depth range");
  if (!(max_lateral >= min_lateral)) throw ConfigError("scene: bad lateral range");
  if (!(max_yaw >= min_yaw)) throw ConfigError("scene: bad yaw range");
  if (classes.empty()) throw ConfigError("scene: need at least one class");
  if (max_retries < 1) throw ConfigError("scene: max_retries must be >= 1");
}

namespace {

CalibrationFile make_calibration(const CameraIntrinsics& intr) {
  CalibrationFile calib;
  const Mat34 plain = {intr.fx, 0, intr.cx, 0, 0, intr.fy, intr.cy, 0, 0, 0, 1, 0};
  Mat34 left = plain;
  left[7] = intr.ty;
  calib.projections["P0"] = plain;
  calib.projections["P1"] = plain;
  calib.projections["P2"] = left;
  calib.projections["P3"] = plain;
  calib.rectification = Mat33{1, 0, 0, 0, 1, 0, 0, 0, 1};
  calib.velo_to_cam = Mat34{0, -1, 0, 0, 0, 0, -1, 0, 1, 0, 0, 0};
  return calib;
}

/// Unclamped hull of the projected corners; caller checked z > 0.
Box2D raw_hull(const Box3D& box, const CameraIntrinsics& intr) {
  const auto corners = corners3d(box);
  double left = std::numeric_limits<double>::infinity();
  double top = left, right = -left, bottom = -left;
  for (const Point3& p : corners) {
    const Pixel px = project(p, intr);
    left = std::min(left, px.u);
    right = std::max(right, px.u);
    top = std::min(top, px.v);
    bottom = std::max(bottom, px.v);
  }
  return {left, top, right, bottom};
}

}  // namespace

SyntheticFrame generate_frame(const SceneSpec& spec, int frame_index) {
  spec.validate();
  CounterRng rng(spec.seed, static_cast<std::uint64_t>(frame_index));

  SyntheticFrame frame;
  frame.calib = make_calibration(spec.camera);

  const int count = rng.uniform_int(spec.min_objects, spec.max_objects);
  for (int i = 0; i < count; ++i) {
    for (int attempt = 0; attempt < spec.max_retries; ++attempt) {
      const int cls = rng.uniform_int(0, static_cast<int>(spec.classes.size()) - 1);
      const ClassDims& dims = spec.classes[cls];
      Box3D box;
      box.h = std::max(0.2 * dims.mean_h, rng.normal(dims.mean_h, dims.std_h));
      box.w = std::max(0.2 * dims.mean_w, rng.normal(dims.mean_w, dims.std_w));
      box.l = std::max(0.2 * dims.mean_l, rng.normal(dims.mean_l, dims.std_l));
      box.z = rng.uniform(spec.min_depth, spec.max_depth);
      box.x = rng.uniform(spec.min_lateral, spec.max_lateral);
      box.y = spec.ground.elevation;  // bottom face exactly on the ground
      box.yaw = normalize_angle(rng.uniform(spec.min_yaw, spec.max_yaw));

      Box2D bbox, hull;
      try {
        bbox = project_box(box, spec.camera);
        hull = raw_hull(box, spec.camera);
      } catch (const GeometryError&) {
        continue;  // behind camera: resample
      }
      if (bbox.width() < 2.0 || bbox.height() < 2.0) continue;  // off-image

      LabelRecord r;
      r.category = dims.category;
      r.occlusion = 0;
      const double hull_area = hull.area();
      r.truncation = hull_area > 0 ? std::clamp(1.0 - bbox.area() / hull_area, 0.0, 1.0) : 0.0;
      r.bbox2d = bbox;
      r.h3d = box.h;
      r.w3d = box.w;
      r.l3d = box.l;
      r.x3d = box.x;
      r.y3d = box.y;
      r.z3d = box.z;
      r.rotation_y = box.yaw;
      r.alpha = alpha_from_yaw(box.yaw, box.x, box.z);
      frame.labels.push_back(std::move(r));
      break;
    }
  }
  return frame;
}

std::vector<SyntheticFrame> generate(const SceneSpec& spec, int frames) {
  spec.validate();
  std::vector<SyntheticFrame> out(frames);
  for (int f = 0; f < frames; ++f) out[f] = generate_frame(spec, f);
  return out;
}

void write_dataset(const std::vector<SyntheticFrame>& frames,
                   const std::filesystem::path& root) {
  std::filesystem::create_directories(root / "calib");
  std::filesystem::create_directories(root / "label_2");
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const std::string name = frame_name(static_cast<int>(f)) + ".txt";
    {
      std::ofstream out(root / "calib" / name);
      if (!out) throw InputError("cannot write " + (root / "calib" / name).string());
      write_calibration(frames[f].calib, out);
    }
    {
      std::ofstream out(root / "label_2" / name);
      if (!out) throw InputError("cannot write " + (root / "label_2" / name).string());
      write_labels(frames[f].labels, out);
    }
  }
}

}  // namespace ga3d
