#pragma once

#include <string>
#include <vector>

#include "trislam/geometry.hpp"

namespace trislam {

struct TrajectoryEntry {
  double timestamp = 0;
  Pose pose;
};

using Trajectory = std::vector<TrajectoryEntry>;

// TUM trajectory text: one `timestamp tx ty tz qx qy qz qw` line per frame,
// '#' comment lines ignored.
Trajectory read_trajectory(const std::string& path);
void write_trajectory(const std::string& path, const Trajectory& traj);

}  // namespace trislam
