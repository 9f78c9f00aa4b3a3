#pragma once

#include <string>
#include <vector>

#include "trislam/image.hpp"
#include "trislam/submap.hpp"
#include "trislam/trajectory.hpp"

namespace trislam {

/// CSG primitive with exact SDF (1-Lipschitz). Subtraction carves the
/// primitive out of everything folded so far.
struct Primitive {
  enum class Shape { Box, Sphere };
  enum class Op { Union, Subtraction };
  Shape shape = Shape::Box;
  Op op = Op::Union;
  Vec3 center{0, 0, 0};
  Vec3 half_extent{1, 1, 1};  // boxes
  double radius = 1.0;        // spheres
  Vec3 color{0.5, 0.5, 0.5};
};

struct AnalyticScene {
  std::string name;
  std::vector<Primitive> primitives;
  Aabb bounds;
};

double primitive_sdf(const Primitive& prim, const Vec3& p);

// Exact scene SDF: union folds with min, subtraction with max(d, -prim).
// Throws on an empty scene.
double scene_sdf(const AnalyticScene& scene, const Vec3& p);
// Color of the primitive attaining the fold at p.
Vec3 scene_color(const AnalyticScene& scene, const Vec3& p);

// The default test scene: a 4x4x3 m room built from six distinctly colored
// wall slabs plus two interior primitives.
AnalyticScene box_room_scene();
AnalyticScene scene_by_name(const std::string& name);

struct TrajectorySpec {
  enum class Kind { Orbit, Lissajous, WaypointLerp };
  Kind kind = Kind::Orbit;
  int frames = 100;
  Vec3 look_at{0, 0, 1.2};
  // orbit
  Vec3 orbit_center{0, 0, 1.5};
  double orbit_radius = 1.2;
  double orbit_span = 6.283185307179586;
  // lissajous (amplitudes around orbit_center)
  Vec3 amplitude{1.0, 1.0, 0.3};
  // waypoint-lerp
  std::vector<Vec3> waypoints;
};

// Camera pose for frame i; motion is smoothstep-ramped so the camera starts
// at rest, and the look-at target stays in front of the camera.
Pose trajectory_pose(const TrajectorySpec& spec, int frame);

// Sphere tracing against the analytic scene: hit when |sdf| < 1e-4 within
// 10 m; missed pixels get depth 0.
void render_gt_frame(const AnalyticScene& scene, const CameraIntrinsics& intr, const Pose& pose,
                     ColorImage* color, DepthImage* depth);

struct DatasetGenOptions {
  double depth_noise_sigma = 0.0;  // optional Gaussian depth noise (m)
  std::uint64_t seed = 0;
};

// Writes color/ (P6 ppm), depth/ (16-bit P5 pgm, big-endian, depth *
// depth_scale), groundtruth.txt (TUM) and intrinsics.txt
// (fx fy cx cy width height depth_scale).
void generate_dataset(const AnalyticScene& scene, const TrajectorySpec& traj,
                      const CameraIntrinsics& intr, const std::string& out_dir,
                      const DatasetGenOptions& opts = {});

/// On-disk RGB-D sequence in the layout produced by generate_dataset.
class Dataset {
 public:
  explicit Dataset(const std::string& dir);

  const CameraIntrinsics& intrinsics() const { return intr_; }
  const Trajectory& groundtruth() const { return gt_; }
  int frame_count() const { return static_cast<int>(color_paths_.size()); }
  ColorImage load_color(int frame) const;
  DepthImage load_depth(int frame) const;
  double timestamp(int frame) const { return gt_.empty() ? frame : gt_[static_cast<std::size_t>(frame)].timestamp; }

 private:
  CameraIntrinsics intr_;
  Trajectory gt_;
  std::vector<std::string> color_paths_;
  std::vector<std::string> depth_paths_;
};

}  // namespace trislam
