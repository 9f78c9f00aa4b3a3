#include "trislam/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "trislam/rng.hpp"

namespace trislam {

namespace fs = std::filesystem;

double primitive_sdf(const Primitive& prim, const Vec3& p) {
  if (prim.shape == Primitive::Shape::Sphere) return (p - prim.center).norm() - prim.radius;
  const Vec3 q = (p - prim.center).cwiseAbs() - prim.half_extent;
  const Vec3 outside = q.cwiseMax(0.0);
  const double inside = std::min(std::max({q.x(), q.y(), q.z()}), 0.0);
  return outside.norm() + inside;
}

namespace {
// Returns both the fold value and the color of the attaining primitive.
std::pair<double, Vec3> scene_fold(const AnalyticScene& scene, const Vec3& p) {
  if (scene.primitives.empty()) throw std::runtime_error("scene_sdf: empty scene");
  double d = std::numeric_limits<double>::infinity();
  Vec3 color{0, 0, 0};
  for (const auto& prim : scene.primitives) {
    const double pd = primitive_sdf(prim, p);
    if (prim.op == Primitive::Op::Union) {
      if (pd < d) {
        d = pd;
        color = prim.color;
      }
    } else {  // subtraction: max(d, -pd)
      if (-pd > d) {
        d = -pd;
        color = prim.color;
      }
    }
  }
  return {d, color};
}
}  // namespace

double scene_sdf(const AnalyticScene& scene, const Vec3& p) { return scene_fold(scene, p).first; }
Vec3 scene_color(const AnalyticScene& scene, const Vec3& p) { return scene_fold(scene, p).second; }

AnalyticScene box_room_scene() {
  AnalyticScene scene;
  scene.name = "box-room";
  const double t = 0.05;  // wall half-thickness
  auto slab = [&](const Vec3& c, const Vec3& h, const Vec3& color) {
    Primitive prim;
    prim.shape = Primitive::Shape::Box;
    prim.center = c;
    prim.half_extent = h;
    prim.color = color;
    return prim;
  };
  // Interior is x,y in (-2,2), z in (0,3); walls are 10 cm slabs.
  scene.primitives.push_back(slab({0, 0, -t}, {2.1, 2.1, t}, {0.75, 0.70, 0.62}));      // floor
  scene.primitives.push_back(slab({0, 0, 3 + t}, {2.1, 2.1, t}, {0.90, 0.90, 0.93}));   // ceiling
  scene.primitives.push_back(slab({2 + t, 0, 1.5}, {t, 2.1, 1.6}, {0.80, 0.25, 0.20}));  // +x
  scene.primitives.push_back(slab({-2 - t, 0, 1.5}, {t, 2.1, 1.6}, {0.20, 0.70, 0.30})); // -x
  scene.primitives.push_back(slab({0, 2 + t, 1.5}, {2.1, t, 1.6}, {0.25, 0.35, 0.80}));  // +y
  scene.primitives.push_back(slab({0, -2 - t, 1.5}, {2.1, t, 1.6}, {0.85, 0.75, 0.20})); // -y

  Primitive sphere;
  sphere.shape = Primitive::Shape::Sphere;
  sphere.center = Vec3(1.35, -1.10, 0.60);
  sphere.radius = 0.30;
  sphere.color = Vec3(0.80, 0.30, 0.70);
  scene.primitives.push_back(sphere);

  scene.primitives.push_back(
      slab({-1.45, 1.05, 0.35}, {0.25, 0.25, 0.35}, {0.20, 0.75, 0.80}));  // crate

  scene.bounds.min = Vec3(-2.2, -2.2, -0.2);
  scene.bounds.max = Vec3(2.2, 2.2, 3.2);
  return scene;
}

AnalyticScene scene_by_name(const std::string& name) {
  if (name == "box-room") return box_room_scene();
  throw std::runtime_error("unknown scene: " + name);
}

namespace {
double smoothstep01(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

// Camera axes: x right, y down (image v), z forward.
Pose look_at_pose(const Vec3& position, const Vec3& target) {
  Vec3 forward = target - position;
  const double n = forward.norm();
  if (n < 1e-9) throw std::runtime_error("look-at target coincides with camera position");
  forward /= n;
  Vec3 up_hint(0, 0, 1);
  if (std::abs(forward.dot(up_hint)) > 0.999) up_hint = Vec3(0, 1, 0);
  const Vec3 right = forward.cross(up_hint).normalized();
  const Vec3 down = forward.cross(right);
  Mat3 rot;
  rot.col(0) = right;
  rot.col(1) = down;
  rot.col(2) = forward;
  return Pose(Eigen::Quaterniond(rot), position);
}
}  // namespace

Pose trajectory_pose(const TrajectorySpec& spec, int frame) {
  const double u = spec.frames > 1 ? static_cast<double>(frame) / spec.frames : 0.0;
  const double s = smoothstep01(u);
  Vec3 position;
  switch (spec.kind) {
    case TrajectorySpec::Kind::Orbit: {
      const double theta = spec.orbit_span * s;
      position = spec.orbit_center + Vec3(spec.orbit_radius * std::cos(theta),
                                          spec.orbit_radius * std::sin(theta), 0.0);
      break;
    }
    case TrajectorySpec::Kind::Lissajous: {
      const double w = 6.283185307179586 * s;
      position = spec.orbit_center + Vec3(spec.amplitude.x() * std::sin(w),
                                          spec.amplitude.y() * std::sin(2.0 * w),
                                          spec.amplitude.z() * std::sin(3.0 * w));
      break;
    }
    case TrajectorySpec::Kind::WaypointLerp: {
      if (spec.waypoints.size() < 2)
        throw std::runtime_error("waypoint trajectory needs at least 2 waypoints");
      const double pos = s * static_cast<double>(spec.waypoints.size() - 1);
      const std::size_t seg = std::min(static_cast<std::size_t>(pos), spec.waypoints.size() - 2);
      const double f = pos - static_cast<double>(seg);
      position = (1.0 - f) * spec.waypoints[seg] + f * spec.waypoints[seg + 1];
      break;
    }
  }
  return look_at_pose(position, spec.look_at);
}

void render_gt_frame(const AnalyticScene& scene, const CameraIntrinsics& intr, const Pose& pose,
                     ColorImage* color, DepthImage* depth) {
  *color = ColorImage(intr.width, intr.height);
  *depth = DepthImage(intr.width, intr.height);
  constexpr double kHitEps = 1e-4;
  constexpr double kMaxRange = 10.0;
  constexpr int kMaxSteps = 512;
  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      const Vec3 cam_dir = pixel_camera_dir(intr, u, v);
      const double z_to_arc = cam_dir.norm();
      const Vec3 dir = (pose.q * cam_dir) / z_to_arc;
      double t = 0.0;
      bool hit = false;
      for (int step = 0; step < kMaxSteps && t < kMaxRange; ++step) {
        const Vec3 p = pose.t + t * dir;
        const double d = scene_sdf(scene, p);
        if (std::abs(d) < kHitEps) {
          hit = true;
          break;
        }
        t += d;
        if (d < 0) break;  // started inside matter; treat as miss
      }
      if (hit) {
        const Vec3 p = pose.t + t * dir;
        depth->at(u, v) = t / z_to_arc;  // camera z-depth
        color->at(u, v) = scene_color(scene, p);
      }
    }
  }
}

void generate_dataset(const AnalyticScene& scene, const TrajectorySpec& traj,
                      const CameraIntrinsics& intr, const std::string& out_dir,
                      const DatasetGenOptions& opts) {
  intr.validate();
  fs::create_directories(fs::path(out_dir) / "color");
  fs::create_directories(fs::path(out_dir) / "depth");

  Rng rng(opts.seed);
  Trajectory gt;
  char name[64];
  for (int i = 0; i < traj.frames; ++i) {
    const Pose pose = trajectory_pose(traj, i);
    ColorImage color;
    DepthImage depth;
    render_gt_frame(scene, intr, pose, &color, &depth);
    if (opts.depth_noise_sigma > 0) {
      for (double& d : depth.depths)
        if (d > 0) d = std::max(0.0, d + opts.depth_noise_sigma * rng.normal());
    }
    std::snprintf(name, sizeof(name), "%06d", i);
    write_ppm((fs::path(out_dir) / "color" / (std::string(name) + ".ppm")).string(), color);
    write_pgm16((fs::path(out_dir) / "depth" / (std::string(name) + ".pgm")).string(), depth,
                intr.depth_scale);
    gt.push_back({static_cast<double>(i), pose});
  }
  write_trajectory((fs::path(out_dir) / "groundtruth.txt").string(), gt);

  std::ofstream intr_file(fs::path(out_dir) / "intrinsics.txt");
  if (!intr_file) throw std::runtime_error("cannot write intrinsics.txt in " + out_dir);
  intr_file << intr.fx << " " << intr.fy << " " << intr.cx << " " << intr.cy << " " << intr.width
            << " " << intr.height << " " << intr.depth_scale << "\n";
}

Dataset::Dataset(const std::string& dir) {
  std::ifstream intr_file(fs::path(dir) / "intrinsics.txt");
  if (!intr_file) throw std::runtime_error("dataset: missing intrinsics.txt in " + dir);
  intr_file >> intr_.fx >> intr_.fy >> intr_.cx >> intr_.cy >> intr_.width >> intr_.height >>
      intr_.depth_scale;
  intr_.validate();
  gt_ = read_trajectory((fs::path(dir) / "groundtruth.txt").string());

  std::vector<std::string> colors, depths;
  for (const auto& entry : fs::directory_iterator(fs::path(dir) / "color"))
    colors.push_back(entry.path().string());
  for (const auto& entry : fs::directory_iterator(fs::path(dir) / "depth"))
    depths.push_back(entry.path().string());
  std::sort(colors.begin(), colors.end());
  std::sort(depths.begin(), depths.end());
  if (colors.size() != depths.size())
    throw std::runtime_error("dataset: color/depth frame count mismatch in " + dir);
  if (colors.empty()) throw std::runtime_error("dataset: no frames in " + dir);
  color_paths_ = std::move(colors);
  depth_paths_ = std::move(depths);
}

ColorImage Dataset::load_color(int frame) const {
  return read_ppm(color_paths_[static_cast<std::size_t>(frame)]);
}

DepthImage Dataset::load_depth(int frame) const {
  return read_pgm16(depth_paths_[static_cast<std::size_t>(frame)], intr_.depth_scale);
}

}  // namespace trislam
