#pragma once

#include <string>
#include <vector>

#include "ga3d/boxes.hpp"

namespace ga3d {

/// One scored detection: directly-estimated 2D box plus the full 3D box.
struct Detection {
  std::string category;
  Box2D box2d{};
  Box3D box3d{};
  double alpha = 0;
  double score = 0;
};

using FrameDetections = std::vector<Detection>;

}  // namespace ga3d
