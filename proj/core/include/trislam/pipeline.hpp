#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "trislam/checkpoint.hpp"
#include "trislam/render_loss.hpp"
#include "trislam/submap_manager.hpp"
#include "trislam/synthetic.hpp"

namespace trislam {

struct SlamConfig {
  int map_every = 5;            // K: mapping interval (frames)
  int covisible_keyframes = 8;  // M
  int ba_keyframes = 10;        // G
  int ba_interval = 20;
  int ba_min_keyframes = 4;
  int rays_track = 1024;  // N_cam
  int rays_map = 2048;    // N_map
  int iters_track = 10;
  int iters_map = 15;
  int iters_ba = 15;
  double threshold_p = 0.2;  // submap allocation threshold
  double expansion_l = 0.5;  // submap boundary expansion (m)
  RenderConfig render;
  LossWeights loss_weights;
  FieldConfig field;
  AdamConfig adam;
  double lr_mlp = 1e-3;
  double lr_beta = 1e-3;
  double lr_pose_track = 1e-3;
  double lr_pose_map = 5e-4;
  double beta_init = 10.0;
  int alloc_samples = 1000;
  double depth_max = 10.0;
  int covis_probe_pixels = 200;
  double covis_min_score = 0.05;
  int track_min_valid_pixels = 50;
  bool alloc_every_frame = false;
  bool single_map = false;  // never allocate after the first submap
  bool no_ba = false;
  bool threaded = false;  // overlap mapping with tracking (non-deterministic)
  double pose_noise_t = 0.0;      // injected per-frame translation noise (m)
  double pose_noise_r_deg = 0.0;  // injected per-frame rotation noise (deg)
  std::uint64_t seed = 0;
  bool single_precision = false;
};

struct Keyframe {
  int frame_index = 0;
  ColorImage color;
  DepthImage depth;
  BlockId pose_block = -1;
  std::vector<int> valid_pixels;  // indices of valid-depth pixels
};

struct LossLogEntry {
  std::string phase;  // init | track | map | ba
  int frame_index = 0;
  int iter = 0;
  LossValues losses;
  double total = 0;
  int rays_kept = 0;
};

/// Sequential frame loop: track, (every K frames) allocate + map, (every
/// ba_interval frames) global bundle adjustment. With cfg.threaded, mapping
/// of a keyframe overlaps tracking of the following frames, which read a
/// parameter snapshot republished between mapping iterations.
class SlamPipeline {
 public:
  SlamPipeline(const SlamConfig& cfg, const CameraIntrinsics& intr);
  ~SlamPipeline();

  // Frame 0 requires gt_pose (it is fixed for the whole run).
  void process_frame(const ColorImage& color, const DepthImage& depth, const Pose* gt_pose);
  // Joins any pending mapping work; called automatically by the destructor.
  void finish();

  // Final per-frame poses; keyframe entries reflect mapping/BA refinement.
  Trajectory trajectory(const std::vector<double>& timestamps) const;

  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  const SubMapManager& manager() const { return *manager_; }
  const Decoders& decoders() const { return *decoders_; }
  BlockId beta_block() const { return beta_block_; }
  SceneField field() const { return SceneField{manager_.get(), decoders_.get(), beta_block_}; }
  const SlamConfig& config() const { return cfg_; }
  const CameraIntrinsics& intrinsics() const { return intr_; }

  const std::vector<Keyframe>& keyframes() const { return keyframes_; }
  Keyframe& keyframe(std::size_t i) { return keyframes_[i]; }
  const std::vector<LossLogEntry>& loss_history() const { return loss_log_; }
  int frames_processed() const { return static_cast<int>(frame_poses_.size()); }

  // Per-allocation `frame_index min... max...` lines.
  const std::vector<std::string>& submap_log() const { return submap_log_; }

  // Exposed for bundle-adjustment experiments; overrides <= 0 keep config
  // values. Keyframe sampling still draws from the shared rng.
  void global_ba(int iters_override = -1, double pose_lr_override = -1.0);

  // Final pose of a processed frame (keyframes read their refined block).
  Pose trajectory_pose_of(int frame_index) const;

  // Co-visibility scores of every keyframe against the given pose (used by
  // mapping; public for tests). Returns keyframe indices, best first.
  std::vector<std::pair<std::size_t, double>> covisibility_scores(const Pose& pose,
                                                                  Rng& rng) const;

 private:
  struct FrameRecord {
    Pose pose;
    int keyframe_id = -1;  // refined pose lives in that block when >= 0
  };

  void initialize_first_frame(const ColorImage& color, const DepthImage& depth,
                              const Pose& gt_pose);
  Pose track_frame(const ColorImage& color, const DepthImage& depth, int frame_index);
  std::size_t insert_keyframe(const ColorImage& color, const DepthImage& depth, int frame_index,
                              const Pose& pose);
  void map_optimize(std::size_t kf_id, const Pose& pose, int frame_index, Rng& rng);
  void global_ba_impl(Rng& rng, int iters, double pose_lr);
  void run_mapping_iterations(const std::vector<std::size_t>& frame_kf_ids, int iterations,
                              double pose_lr, const char* phase, int frame_index, Rng& rng,
                              bool half_to_first);
  void allocate_if_needed(const DepthImage& depth, const Pose& pose, int frame_index);
  Pose inject_pose_noise(const Pose& pose);
  std::vector<int> valid_pixel_list(const DepthImage& depth) const;
  void step_scene_and_poses(const std::vector<char>& submaps_touched,
                            const std::vector<PoseSlot>& slots,
                            const std::vector<BlockId>& pose_blocks, double pose_lr);
  void log_losses(const char* phase, int frame_index, int iter, const BatchStats& stats);
  void publish_snapshot();
  void join_worker();

  SlamConfig cfg_;
  CameraIntrinsics intr_;
  Rng rng_;
  ParamStore store_;
  std::unique_ptr<SubMapManager> manager_;
  std::unique_ptr<Decoders> decoders_;
  BlockId beta_block_ = -1;

  std::vector<Keyframe> keyframes_;
  std::vector<FrameRecord> frame_poses_;
  std::vector<LossLogEntry> loss_log_;
  std::vector<std::string> submap_log_;

  // threaded mode
  std::thread worker_;
  bool worker_active_ = false;
  std::mutex snapshot_mutex_;
  std::shared_ptr<ParamStore> snapshot_store_;
  std::shared_ptr<SubMapManager> snapshot_manager_;
};

/// End-to-end run over a dataset directory. Writes trajectory.txt,
/// checkpoint.txt/checkpoint.bin, loss.csv and submaps.txt into out_dir.
struct RunOutputs {
  Trajectory trajectory;
  std::string trajectory_path;
  std::string checkpoint_manifest;
  std::string checkpoint_bin;
};
RunOutputs run_slam(const Dataset& dataset, const SlamConfig& cfg, const std::string& out_dir);

}  // namespace trislam
