#include "trislam/submap_manager.hpp"

#include <cmath>
#include <stdexcept>

#include "trislam/logging.hpp"

namespace trislam {

int SubMapManager::locate(const Vec3& p) const {
  for (std::size_t i = 0; i < submaps_.size(); ++i) {
    if (submaps_[i]->bounds().contains(p)) return static_cast<int>(i);
  }
  return -1;
}

std::optional<int> SubMapManager::maybe_allocate(const std::vector<Vec3>& world_points,
                                                 const Vec3& cam_pos, ParamStore& store,
                                                 Rng& rng) {
  if (world_points.empty()) throw std::runtime_error("maybe_allocate: empty point list");
  std::vector<const Vec3*> outside;
  outside.reserve(world_points.size());
  for (const Vec3& p : world_points) {
    if (locate(p) < 0) outside.push_back(&p);
  }
  const double fraction_outside =
      static_cast<double>(outside.size()) / static_cast<double>(world_points.size());
  if (!submaps_.empty() && fraction_outside <= threshold_p_) return std::nullopt;

  Aabb box;
  box.min = cam_pos;
  box.max = cam_pos;
  for (const Vec3* p : outside) box.expand_to(*p);
  box.min -= Vec3::Constant(expansion_l_);
  box.max += Vec3::Constant(expansion_l_);

  const int index = static_cast<int>(submaps_.size());
  submaps_.push_back(std::make_unique<SubMap>(store, box, index, field_cfg_, rng));
  log::info("allocated submap ", index, " bounds [", box.min.x(), ",", box.min.y(), ",",
            box.min.z(), "] - [", box.max.x(), ",", box.max.y(), ",", box.max.z(), "], N_max=",
            submaps_.back()->n_max(), " H=", submaps_.back()->table_size(),
            " outside_fraction=", fraction_outside);
  return index;
}

std::vector<Ray> SubMapManager::filter_rays(const std::vector<Ray>& rays,
                                            const std::vector<double>& far_depths) const {
  std::vector<Ray> kept;
  kept.reserve(rays.size());
  for (std::size_t i = 0; i < rays.size(); ++i) {
    const Vec3 far_point = rays[i].point_at_depth(far_depths[i]);
    if (locate(far_point) >= 0) kept.push_back(rays[i]);
  }
  return kept;
}

int SubMapManager::restore_submap(const Aabb& bounds, ParamStore& store, Rng& rng) {
  const int index = static_cast<int>(submaps_.size());
  submaps_.push_back(std::make_unique<SubMap>(store, bounds, index, field_cfg_, rng));
  return index;
}

std::unique_ptr<SubMapManager> SubMapManager::clone() const {
  auto copy = std::make_unique<SubMapManager>(threshold_p_, expansion_l_, field_cfg_);
  copy->submaps_.reserve(submaps_.size());
  for (const auto& sm : submaps_) copy->submaps_.push_back(std::make_unique<SubMap>(*sm));
  return copy;
}

void SubMapManager::set_recording(bool on) const {
  for (const auto& sm : submaps_) sm->set_recording(on);
}

std::int64_t SubMapManager::finest_collision_pairs() const {
  std::int64_t total = 0;
  for (const auto& sm : submaps_) total += sm->finest_collision_pairs();
  return total;
}

std::vector<Vec3> sample_allocation_points(const DepthImage& depth, const CameraIntrinsics& intr,
                                           const Pose& pose, int n, double depth_max, Rng& rng) {
  std::vector<Vec3> points;
  points.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int u = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(depth.width)));
    const int v = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(depth.height)));
    const double d = depth.at(u, v);
    if (d <= 0.0 || d > depth_max) continue;
    points.push_back(back_project(intr, pose, u, v, d));
  }
  if (points.size() < 10) throw std::runtime_error("insufficient depth for submap allocation");

  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  double mean_sq = 0.0;
  for (const Vec3& p : points) mean_sq += (p - centroid).squaredNorm();
  mean_sq /= static_cast<double>(points.size());
  const double limit = 3.0 * std::sqrt(mean_sq);

  std::vector<Vec3> kept;
  kept.reserve(points.size());
  for (const Vec3& p : points) {
    if ((p - centroid).norm() <= limit) kept.push_back(p);
  }
  return kept;
}

}  // namespace trislam
