#include "trislam/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string_view>

#include "trislam/logging.hpp"

namespace trislam {

namespace fs = std::filesystem;

namespace {
std::string pose_block_name(int frame_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "pose.%06d", frame_index);
  return buf;
}

void renormalize_quaternion(ParamBlock& block) {
  auto& v = block.values;
  const double norm2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3];
  if (norm2 > 1e-24 && std::abs(norm2 - 1.0) > 1e-13) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (int i = 0; i < 4; ++i) v[static_cast<std::size_t>(i)] *= inv;
  }
}

Pose pose_from_block(const ParamBlock& block) {
  Vec7 v;
  for (int i = 0; i < 7; ++i) v[i] = block.values[static_cast<std::size_t>(i)];
  return from_vec7(v);
}

void write_pose_to_block(ParamBlock& block, const Pose& pose) {
  const Vec7 v = to_vec7(pose);
  for (int i = 0; i < 7; ++i) block.values[static_cast<std::size_t>(i)] = v[i];
}
}  // namespace

SlamPipeline::SlamPipeline(const SlamConfig& cfg, const CameraIntrinsics& intr)
    : cfg_(cfg), intr_(intr), rng_(cfg.seed) {
  intr_.validate();
  store_.set_quantize_storage(cfg.single_precision);
  decoders_ = std::make_unique<Decoders>(store_, cfg.field.levels * cfg.field.feat_dim,
                                         cfg.field.hidden_dim, cfg.lr_mlp, rng_);
  beta_block_ = add_beta_block(store_, cfg.beta_init, cfg.lr_beta);
  manager_ = std::make_unique<SubMapManager>(cfg.threshold_p, cfg.expansion_l, cfg.field);
}

SlamPipeline::~SlamPipeline() { finish(); }

void SlamPipeline::finish() { join_worker(); }

void SlamPipeline::join_worker() {
  if (worker_active_) {
    worker_.join();
    worker_active_ = false;
  }
}

void SlamPipeline::publish_snapshot() {
  auto store_copy = std::make_shared<ParamStore>(store_);
  auto manager_copy = std::shared_ptr<SubMapManager>(manager_->clone());
  std::lock_guard<std::mutex> lock(snapshot_mutex_);
  snapshot_store_ = std::move(store_copy);
  snapshot_manager_ = std::move(manager_copy);
}

std::vector<int> SlamPipeline::valid_pixel_list(const DepthImage& depth) const {
  std::vector<int> valid;
  valid.reserve(depth.depths.size());
  for (int i = 0; i < static_cast<int>(depth.depths.size()); ++i) {
    const double d = depth.depths[static_cast<std::size_t>(i)];
    if (d > 0.0 && d <= cfg_.depth_max) valid.push_back(i);
  }
  return valid;
}

Pose SlamPipeline::inject_pose_noise(const Pose& pose) {
  if (cfg_.pose_noise_t <= 0 && cfg_.pose_noise_r_deg <= 0) return pose;
  Pose noisy = pose;
  if (cfg_.pose_noise_t > 0)
    noisy.t += cfg_.pose_noise_t * Vec3(rng_.normal(), rng_.normal(), rng_.normal());
  if (cfg_.pose_noise_r_deg > 0) {
    const double angle = cfg_.pose_noise_r_deg * (3.14159265358979323846 / 180.0) * rng_.normal();
    Vec3 axis(rng_.normal(), rng_.normal(), rng_.normal());
    const double n = axis.norm();
    if (n > 1e-12) {
      axis /= n;
      noisy.q = (noisy.q * Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis))).normalized();
    }
  }
  return noisy;
}

void SlamPipeline::process_frame(const ColorImage& color, const DepthImage& depth,
                                 const Pose* gt_pose) {
  const int index = static_cast<int>(frame_poses_.size());
  if (index == 0) {
    if (!gt_pose) throw std::runtime_error("first frame requires a ground-truth pose");
    initialize_first_frame(color, depth, *gt_pose);
    return;
  }

  const bool mapping_frame = index % cfg_.map_every == 0;
  const bool ba_frame = !cfg_.no_ba && cfg_.ba_interval > 0 && index % cfg_.ba_interval == 0;
  if (cfg_.threaded && (mapping_frame || ba_frame)) join_worker();

  Pose tracked = track_frame(color, depth, index);
  tracked = inject_pose_noise(tracked);
  frame_poses_.push_back({tracked, -1});

  if (mapping_frame) {
    // Structural mutations (submap allocation, keyframe insertion) happen on
    // this thread; in threaded mode the worker only optimizes.
    allocate_if_needed(depth, tracked, index);
    const std::size_t kf_id = insert_keyframe(color, depth, index, tracked);
    if (cfg_.threaded) {
      publish_snapshot();
      const Pose pose_copy = tracked;
      worker_ = std::thread([this, kf_id, pose_copy, index, ba_frame] {
        Rng worker_rng(cfg_.seed ^ (static_cast<std::uint64_t>(index) * 0x9e3779b97f4a7c15ULL) ^
                       0x517cc1b727220a95ULL);
        map_optimize(kf_id, pose_copy, index, worker_rng);
        if (ba_frame) global_ba_impl(worker_rng, cfg_.iters_ba, cfg_.lr_pose_map);
      });
      worker_active_ = true;
    } else {
      map_optimize(kf_id, tracked, index, rng_);
      if (ba_frame) global_ba_impl(rng_, cfg_.iters_ba, cfg_.lr_pose_map);
    }
  } else if (ba_frame) {
    global_ba_impl(rng_, cfg_.iters_ba, cfg_.lr_pose_map);
  }
}

void SlamPipeline::initialize_first_frame(const ColorImage& color, const DepthImage& depth,
                                          const Pose& gt_pose) {
  allocate_if_needed(depth, gt_pose, 0);
  insert_keyframe(color, depth, 0, gt_pose);
  frame_poses_.push_back({gt_pose, 0});
  // Scene and decoders only; the frame-0 pose slot is always frozen.
  run_mapping_iterations({0}, cfg_.iters_map, cfg_.lr_pose_map, "init", 0, rng_, true);
}

std::size_t SlamPipeline::insert_keyframe(const ColorImage& color, const DepthImage& depth,
                                          int frame_index, const Pose& pose) {
  const BlockId block = store_.add_block(pose_block_name(frame_index), 7, cfg_.lr_pose_map);
  write_pose_to_block(store_.block(block), pose);
  Keyframe kf;
  kf.frame_index = frame_index;
  kf.color = color;
  kf.depth = depth;
  kf.pose_block = block;
  kf.valid_pixels = valid_pixel_list(depth);
  keyframes_.push_back(std::move(kf));
  if (!frame_poses_.empty() &&
      static_cast<int>(frame_poses_.size()) - 1 == frame_index)
    frame_poses_.back().keyframe_id = static_cast<int>(keyframes_.size()) - 1;
  return keyframes_.size() - 1;
}

void SlamPipeline::allocate_if_needed(const DepthImage& depth, const Pose& pose,
                                      int frame_index) {
  if (cfg_.single_map && manager_->size() > 0) return;
  const auto points =
      sample_allocation_points(depth, intr_, pose, cfg_.alloc_samples, cfg_.depth_max, rng_);
  const auto allocated = manager_->maybe_allocate(points, pose.t, store_, rng_);
  if (allocated) {
    const Aabb& b = manager_->submap(static_cast<std::size_t>(*allocated)).bounds();
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d %.6f %.6f %.6f %.6f %.6f %.6f", frame_index, b.min.x(),
                  b.min.y(), b.min.z(), b.max.x(), b.max.y(), b.max.z());
    submap_log_.push_back(buf);
  }
}

Pose SlamPipeline::track_frame(const ColorImage& color, const DepthImage& depth,
                               int frame_index) {
  const std::size_t n_prev = frame_poses_.size();
  Pose guess;
  if (n_prev >= 2) {
    const Pose prev = trajectory_pose_of(static_cast<int>(n_prev) - 1);
    const Pose prev2 = trajectory_pose_of(static_cast<int>(n_prev) - 2);
    guess = constant_speed_predict(prev, prev2);
  } else {
    guess = trajectory_pose_of(static_cast<int>(n_prev) - 1);
  }

  const std::vector<int> valid = valid_pixel_list(depth);
  if (static_cast<int>(valid.size()) < cfg_.track_min_valid_pixels) {
    log::warn("frame ", frame_index, ": only ", valid.size(),
              " valid depth pixels, tracking skipped");
    return guess;
  }

  // Snapshot view in threaded mode; live store otherwise.
  ParamStore* track_store = &store_;
  const SubMapManager* track_manager = manager_.get();
  std::shared_ptr<ParamStore> snap_store;
  std::shared_ptr<SubMapManager> snap_manager;
  if (cfg_.threaded && worker_active_) {
    std::lock_guard<std::mutex> lock(snapshot_mutex_);
    snap_store = snapshot_store_;
    snap_manager = snapshot_manager_;
  }
  if (snap_store) {
    track_store = snap_store.get();
    track_manager = snap_manager.get();
  }
  SceneField track_field{track_manager, decoders_.get(), beta_block_};

  ParamBlock pose_block;
  pose_block.name = "tracking";
  pose_block.resize(7);
  write_pose_to_block(pose_block, guess);

  std::vector<PoseSlot> slots{PoseSlot{&pose_block, false}};
  std::vector<PreparedRay> rays;
  rays.reserve(static_cast<std::size_t>(cfg_.rays_track));
  for (int iter = 0; iter < cfg_.iters_track; ++iter) {
    rays.clear();
    for (int r = 0; r < cfg_.rays_track; ++r) {
      const int pix = valid[rng_.uniform_index(valid.size())];
      const int u = pix % depth.width;
      const int vv = pix / depth.width;
      rays.push_back(
          prepare_ray(intr_, 0, u, vv, color.at(u, vv), depth.at(u, vv), cfg_.render, rng_));
    }
    const BatchStats stats = evaluate_batch(*track_store, track_field, slots, rays, cfg_.render,
                                            cfg_.loss_weights, {false, true});
    log_losses("track", frame_index, iter, stats);
    if (stats.rays_kept == 0) {
      log::warn("frame ", frame_index, ": all rays filtered during tracking");
      break;
    }
    adam_step(pose_block, cfg_.lr_pose_track, cfg_.adam);
    renormalize_quaternion(pose_block);
  }
  return pose_from_block(pose_block);
}

std::vector<std::pair<std::size_t, double>> SlamPipeline::covisibility_scores(const Pose& pose,
                                                                              Rng& rng) const {
  std::vector<std::pair<std::size_t, double>> scores;
  for (std::size_t k = 0; k < keyframes_.size(); ++k) {
    const Keyframe& kf = keyframes_[k];
    if (kf.valid_pixels.empty()) {
      scores.push_back({k, 0.0});
      continue;
    }
    const Pose kf_pose = pose_from_block(store_.block(kf.pose_block));
    int in_view = 0;
    const int probes = cfg_.covis_probe_pixels;
    for (int p = 0; p < probes; ++p) {
      const int pix = kf.valid_pixels[rng.uniform_index(kf.valid_pixels.size())];
      const int u = pix % kf.depth.width;
      const int v = pix / kf.depth.width;
      const Vec3 world = back_project(intr_, kf_pose, u, v, kf.depth.at(u, v));
      const auto proj = project_point(intr_, pose, world);
      // Raster extent [-0.5, size-0.5] keeps edge pixels in bounds under
      // round-trip floating-point wobble.
      if (proj && proj->u >= -0.5 && proj->u <= intr_.width - 0.5 && proj->v >= -0.5 &&
          proj->v <= intr_.height - 0.5)
        ++in_view;
    }
    scores.push_back({k, static_cast<double>(in_view) / probes});
  }
  std::stable_sort(scores.begin(), scores.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return scores;
}

void SlamPipeline::map_optimize(std::size_t kf_id, const Pose& pose, int frame_index, Rng& rng) {
  const auto scores = covisibility_scores(pose, rng);
  std::vector<std::size_t> ids{kf_id};
  for (const auto& [id, score] : scores) {
    if (id == kf_id || score <= cfg_.covis_min_score) continue;
    ids.push_back(id);
    if (static_cast<int>(ids.size()) > cfg_.covisible_keyframes) break;
  }
  run_mapping_iterations(ids, cfg_.iters_map, cfg_.lr_pose_map, "map", frame_index, rng, true);
}

void SlamPipeline::global_ba(int iters_override, double pose_lr_override) {
  join_worker();
  const int iters = iters_override > 0 ? iters_override : cfg_.iters_ba;
  const double pose_lr = pose_lr_override > 0 ? pose_lr_override : cfg_.lr_pose_map;
  global_ba_impl(rng_, iters, pose_lr);
}

void SlamPipeline::global_ba_impl(Rng& rng, int iters, double pose_lr) {
  if (static_cast<int>(keyframes_.size()) < cfg_.ba_min_keyframes) {
    log::info("global BA skipped: ", keyframes_.size(), " keyframes < minimum ",
              cfg_.ba_min_keyframes);
    return;
  }
  // Uniform global sample of G keyframes (all of them when G >= db size).
  std::vector<std::size_t> ids(keyframes_.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  if (static_cast<int>(ids.size()) > cfg_.ba_keyframes) {
    for (std::size_t i = 0; i < static_cast<std::size_t>(cfg_.ba_keyframes); ++i) {
      const std::size_t j = i + rng.uniform_index(ids.size() - i);
      std::swap(ids[i], ids[j]);
    }
    ids.resize(static_cast<std::size_t>(cfg_.ba_keyframes));
  }
  const int frame_index = frame_poses_.empty() ? 0 : static_cast<int>(frame_poses_.size()) - 1;
  run_mapping_iterations(ids, iters, pose_lr, "ba", frame_index, rng, false);
}

void SlamPipeline::run_mapping_iterations(const std::vector<std::size_t>& frame_kf_ids,
                                          int iterations, double pose_lr, const char* phase,
                                          int frame_index, Rng& rng, bool half_to_first) {
  const std::size_t n_frames = frame_kf_ids.size();
  if (n_frames == 0) return;

  std::vector<int> rays_per_frame(n_frames, 0);
  if (!half_to_first || n_frames == 1) {
    const int each = std::max(cfg_.rays_map / static_cast<int>(n_frames), 1);
    for (auto& r : rays_per_frame) r = each;
  } else {
    rays_per_frame[0] = cfg_.rays_map / 2;
    const int each =
        std::max((cfg_.rays_map - rays_per_frame[0]) / static_cast<int>(n_frames - 1), 1);
    for (std::size_t i = 1; i < n_frames; ++i) rays_per_frame[i] = each;
  }

  std::vector<PoseSlot> slots(n_frames);
  std::vector<BlockId> pose_blocks(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    const Keyframe& kf = keyframes_[frame_kf_ids[i]];
    pose_blocks[i] = kf.pose_block;
    slots[i] = PoseSlot{&store_.block(kf.pose_block), kf.frame_index == 0};
  }

  SceneField live_field = field();
  std::vector<PreparedRay> rays;
  for (int iter = 0; iter < iterations; ++iter) {
    rays.clear();
    for (std::size_t f = 0; f < n_frames; ++f) {
      const Keyframe& kf = keyframes_[frame_kf_ids[f]];
      if (kf.valid_pixels.empty()) continue;
      for (int r = 0; r < rays_per_frame[f]; ++r) {
        const int pix = kf.valid_pixels[rng.uniform_index(kf.valid_pixels.size())];
        const int u = pix % kf.depth.width;
        const int v = pix / kf.depth.width;
        rays.push_back(prepare_ray(intr_, static_cast<int>(f), u, v, kf.color.at(u, v),
                                   kf.depth.at(u, v), cfg_.render, rng));
      }
    }
    const BatchStats stats = evaluate_batch(store_, live_field, slots, rays, cfg_.render,
                                            cfg_.loss_weights, {true, true});
    log_losses(phase, frame_index, iter, stats);
    if (stats.rays_kept == 0) {
      log::warn(phase, " frame ", frame_index, ": every ray filtered, iteration skipped");
      continue;
    }
    step_scene_and_poses(stats.submap_touched, slots, pose_blocks, pose_lr);
    if (cfg_.threaded) publish_snapshot();
  }
}

void SlamPipeline::step_scene_and_poses(const std::vector<char>& submaps_touched,
                                        const std::vector<PoseSlot>& slots,
                                        const std::vector<BlockId>& pose_blocks, double pose_lr) {
  for (std::size_t s = 0; s < submaps_touched.size(); ++s) {
    if (!submaps_touched[s]) continue;
    for (BlockId id : manager_->submap(s).param_blocks()) store_.step(id, cfg_.adam);
  }
  for (BlockId id : decoders_->param_blocks()) store_.step(id, cfg_.adam);
  store_.step(beta_block_, cfg_.adam);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].frozen) {
      store_.block(pose_blocks[i]).zero_grads();
      continue;
    }
    adam_step(store_.block(pose_blocks[i]), pose_lr, cfg_.adam);
    renormalize_quaternion(store_.block(pose_blocks[i]));
  }
}

void SlamPipeline::log_losses(const char* phase, int frame_index, int iter,
                              const BatchStats& stats) {
  LossLogEntry entry;
  entry.phase = phase;
  entry.frame_index = frame_index;
  entry.iter = iter;
  entry.losses = stats.losses;
  entry.total = stats.total;
  entry.rays_kept = stats.rays_kept;
  loss_log_.push_back(std::move(entry));
}

Pose SlamPipeline::trajectory_pose_of(int frame_index) const {
  const FrameRecord& rec = frame_poses_[static_cast<std::size_t>(frame_index)];
  if (rec.keyframe_id >= 0) {
    const Keyframe& kf = keyframes_[static_cast<std::size_t>(rec.keyframe_id)];
    return pose_from_block(store_.block(kf.pose_block));
  }
  return rec.pose;
}

Trajectory SlamPipeline::trajectory(const std::vector<double>& timestamps) const {
  Trajectory traj;
  traj.reserve(frame_poses_.size());
  for (std::size_t i = 0; i < frame_poses_.size(); ++i) {
    const double ts = i < timestamps.size() ? timestamps[i] : static_cast<double>(i);
    traj.push_back({ts, trajectory_pose_of(static_cast<int>(i))});
  }
  return traj;
}

RunOutputs run_slam(const Dataset& dataset, const SlamConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  SlamPipeline pipeline(cfg, dataset.intrinsics());
  if (dataset.groundtruth().empty())
    throw std::runtime_error("dataset has no groundtruth.txt (needed for the first frame)");

  const int n = dataset.frame_count();
  for (int i = 0; i < n; ++i) {
    const ColorImage color = dataset.load_color(i);
    const DepthImage depth = dataset.load_depth(i);
    const Pose gt = dataset.groundtruth()[static_cast<std::size_t>(i)].pose;
    pipeline.process_frame(color, depth, i == 0 ? &gt : nullptr);
    if (i % 10 == 0) log::info("processed frame ", i, "/", n);
  }
  pipeline.finish();

  std::vector<double> timestamps;
  timestamps.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) timestamps.push_back(dataset.timestamp(i));

  RunOutputs out;
  out.trajectory = pipeline.trajectory(timestamps);
  out.trajectory_path = (fs::path(out_dir) / "trajectory.txt").string();
  write_trajectory(out.trajectory_path, out.trajectory);

  out.checkpoint_manifest = (fs::path(out_dir) / "checkpoint.txt").string();
  out.checkpoint_bin = (fs::path(out_dir) / "checkpoint.bin").string();
  save_checkpoint(out.checkpoint_manifest, out.checkpoint_bin, pipeline.store(),
                  pipeline.manager());

  std::ofstream loss_csv(fs::path(out_dir) / "loss.csv");
  loss_csv << "iter,L_rgb,L_depth,L_fs,L_mid,L_tail,total\n";
  char buf[256];
  int iter = 0;
  for (const auto& e : pipeline.loss_history()) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", iter++, e.losses.rgb,
                  e.losses.depth, e.losses.fs, e.losses.mid, e.losses.tail, e.total);
    loss_csv << buf;
  }

  std::ofstream submap_log(fs::path(out_dir) / "submaps.txt");
  for (const auto& line : pipeline.submap_log()) submap_log << line << "\n";

  return out;
}

}  // namespace trislam
