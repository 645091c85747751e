#pragma once

#include <vector>

#include "orel/so3.hpp"

namespace orel {

struct TimedPose {
  double t = 0.0;
  Pose pose;
};

/// Time-sorted pose sequence with unique timestamps.
using Trajectory = std::vector<TimedPose>;

}  // namespace orel
