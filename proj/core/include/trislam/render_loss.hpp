#pragma once

#include <vector>

#include "trislam/losses.hpp"
#include "trislam/renderer.hpp"
#include "trislam/submap_manager.hpp"

namespace trislam {

struct RenderConfig {
  double near = 0.05;
  double trunc = 0.06;      // near-surface truncation distance (m)
  int n_regular = 32;       // stratified samples over [near, far]
  int n_surface = 8;        // uniform samples over [d - trunc, d + trunc]
  double far_factor = 4.0;  // far = gt_depth + far_factor * trunc

  double far_for(double gt_depth) const { return gt_depth + far_factor * trunc; }
};

// The learnable sharpness is optimized as log(beta) so beta stays positive.
BlockId add_beta_block(ParamStore& store, double beta_init, double learning_rate);
double beta_value(const ParamStore& store, BlockId beta_block);

/// Field handles needed to answer point queries.
struct SceneField {
  const SubMapManager* manager = nullptr;
  const Decoders* decoders = nullptr;
  BlockId beta_block = -1;
};

// Field query at one world point: free space (s=1, black) outside all
// submaps. Used by mesh extraction and depth evaluation.
struct FieldSample {
  double s = 1.0;
  Vec3 color{0, 0, 0};
  bool inside = false;
};
FieldSample query_field(const ParamStore& store, const SceneField& field, const Vec3& p);

/// One pose participating in a batch. `block` may live outside the store
/// (tracking uses a local block). Frozen slots receive no gradients.
struct PoseSlot {
  ParamBlock* block = nullptr;
  bool frozen = false;
};

/// A ray fixed for the lifetime of one optimization problem: pixel geometry
/// in the camera frame plus pre-drawn sample depths, so repeated
/// evaluations are deterministic functions of the parameters.
struct PreparedRay {
  int pose_slot = 0;
  Vec3 cam_dir{0, 0, 1};  // ((u-cx)/fx, (v-cy)/fy, 1)
  Vec3 gt_color{0, 0, 0};
  double gt_depth = 0;
  RaySamples samples;
  SampleClasses classes;
};

PreparedRay prepare_ray(const CameraIntrinsics& intr, int pose_slot, double u, double v,
                        const Vec3& gt_color, double gt_depth, const RenderConfig& rcfg, Rng& rng);

struct BatchOptions {
  bool scene_grads = false;  // tables, decoders, beta
  bool pose_grads = false;   // non-frozen pose slots
};

struct BatchStats {
  LossValues losses;
  double total = 0;
  int rays_kept = 0;
  int rays_total = 0;
  std::vector<char> submap_touched;  // indexed by submap, 1 when sampled
};

// Renders every ray whose far-bound point lies inside some submap, averages
// the four objectives over the kept rays, and (optionally) accumulates
// analytic gradients of the weighted total into parameter blocks. Rays are
// processed in order, so results are deterministic.
BatchStats evaluate_batch(ParamStore& store, const SceneField& field,
                          std::vector<PoseSlot>& poses, const std::vector<PreparedRay>& rays,
                          const RenderConfig& rcfg, const LossWeights& weights,
                          const BatchOptions& opts);

// Depth rendered through the field for one pixel, used by evaluation.
// Returns the weighted-sum depth estimate (gt_depth drives the sampling
// band, matching the training-time sampler).
double render_depth_for_pixel(ParamStore& store, const SceneField& field, const Pose& pose,
                              const CameraIntrinsics& intr, double u, double v, double gt_depth,
                              const RenderConfig& rcfg, Rng& rng);

}  // namespace trislam
