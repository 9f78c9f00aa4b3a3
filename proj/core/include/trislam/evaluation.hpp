#pragma once

#include <functional>
#include <vector>

#include "trislam/mesh.hpp"
#include "trislam/synthetic.hpp"
#include "trislam/trajectory.hpp"

namespace trislam {

// ATE RMSE in cm after closed-form rigid alignment (Procrustes/Horn with
// scale pinned to 1) of the estimated onto the ground-truth translations.
// Trajectories must have equal length (matched by index).
double ate_rmse_cm(const Trajectory& estimated, const Trajectory& groundtruth);

/// Renders depth for one pixel; gt_depth drives the sampling band.
using DepthRenderFn =
    std::function<double(const Pose& pose, double u, double v, double gt_depth)>;

// Mean |rendered - gt| in cm over every stride-th pixel of every stride-th
// frame, skipping invalid gt depths. Throws when nothing is valid.
double depth_l1_cm(const DepthRenderFn& render, const std::vector<Pose>& poses,
                   const std::vector<DepthImage>& gt_depths, const CameraIntrinsics& intr,
                   int stride);

// Convenience binding of depth_l1_cm to a trained field.
double depth_l1_cm_for_field(ParamStore& store, const SceneField& field,
                             const std::vector<Pose>& poses,
                             const std::vector<DepthImage>& gt_depths,
                             const CameraIntrinsics& intr, int stride, const RenderConfig& rcfg,
                             Rng& rng);

/// Chamfer distances between a mesh and the analytic scene, in cm.
/// accuracy: mesh surface samples -> |scene sdf|;
/// completion: scene surface samples -> nearest mesh point.
struct ChamferResult {
  double accuracy_cm = 0;
  double completion_cm = 0;
};
ChamferResult chamfer_vs_scene(const TriangleMesh& mesh, const AnalyticScene& scene,
                               int samples_each_way, Rng& rng);

// Exact point-to-triangle distance (exposed for the chamfer oracle tests).
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace trislam
