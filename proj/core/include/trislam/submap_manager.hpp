#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "trislam/image.hpp"
#include "trislam/submap.hpp"

namespace trislam {

/// Owns the submap collection and the allocation policy. Submaps are only
/// ever appended; bounds never shrink.
class SubMapManager {
 public:
  SubMapManager(double threshold_p, double expansion_l, FieldConfig field_cfg)
      : threshold_p_(threshold_p), expansion_l_(expansion_l), field_cfg_(field_cfg) {}

  std::size_t size() const { return submaps_.size(); }
  const SubMap& submap(std::size_t i) const { return *submaps_[i]; }
  SubMap& submap(std::size_t i) { return *submaps_[i]; }
  double threshold() const { return threshold_p_; }
  double expansion() const { return expansion_l_; }
  const FieldConfig& field_config() const { return field_cfg_; }

  // Oldest (lowest creation index) submap containing p, boundary inclusive.
  // Returns -1 when no submap contains p.
  int locate(const Vec3& p) const;

  // Fraction-outside test against threshold P. When it fires (or on the
  // first call ever), appends a submap bounding {cam_pos} u {outside points}
  // expanded by l on every face and returns its index. Throws on an empty
  // point list.
  std::optional<int> maybe_allocate(const std::vector<Vec3>& world_points, const Vec3& cam_pos,
                                    ParamStore& store, Rng& rng);

  // Keeps exactly the rays whose far-bound point lies inside some submap.
  std::vector<Ray> filter_rays(const std::vector<Ray>& rays,
                               const std::vector<double>& far_depths) const;

  // Restores a submap from checkpoint metadata (no allocation decision).
  int restore_submap(const Aabb& bounds, ParamStore& store, Rng& rng);

  // Structural copy referring to the same parameter blocks; used to give a
  // concurrent reader a stable view while new submaps may be allocated.
  std::unique_ptr<SubMapManager> clone() const;

  void set_recording(bool on) const;
  std::int64_t finest_collision_pairs() const;

 private:
  double threshold_p_ = 0.2;
  double expansion_l_ = 0.5;
  FieldConfig field_cfg_;
  std::vector<std::unique_ptr<SubMap>> submaps_;
};

// Uniformly samples n pixels from the depth image, drops invalid depths
// (<= 0 or > depth_max), back-projects survivors, and removes outliers
// farther than 3x the RMS distance from the sample centroid. Throws
// "insufficient depth" when fewer than 10 valid points remain before
// outlier removal.
std::vector<Vec3> sample_allocation_points(const DepthImage& depth, const CameraIntrinsics& intr,
                                           const Pose& pose, int n, double depth_max, Rng& rng);

}  // namespace trislam
