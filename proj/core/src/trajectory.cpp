#include "trislam/trajectory.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace trislam {

Trajectory read_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory file: " + path);
  Trajectory traj;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double ts, tx, ty, tz, qx, qy, qz, qw;
    if (!(ls >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) continue;
    TrajectoryEntry e;
    e.timestamp = ts;
    e.pose = Pose(Eigen::Quaterniond(qw, qx, qy, qz), Vec3(tx, ty, tz));
    traj.push_back(e);
  }
  return traj;
}

void write_trajectory(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory file: " + path);
  out << "# timestamp tx ty tz qx qy qz qw\n";
  char buf[256];
  for (const auto& e : traj) {
    std::snprintf(buf, sizeof(buf), "%.6f %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n", e.timestamp,
                  e.pose.t.x(), e.pose.t.y(), e.pose.t.z(), e.pose.q.x(), e.pose.q.y(),
                  e.pose.q.z(), e.pose.q.w());
    out << buf;
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace trislam
