#pragma once

#include <array>
#include <cstdint>
#include <memory>

#include "trislam/geometry.hpp"
#include "trislam/hash_grid.hpp"
#include "trislam/hash_plane.hpp"
#include "trislam/mlp.hpp"

namespace trislam {

struct Aabb {
  Vec3 min{0, 0, 0};
  Vec3 max{0, 0, 0};

  bool contains(const Vec3& p) const {
    return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() && p.y() <= max.y() &&
           p.z() >= min.z() && p.z() <= max.z();
  }
  Vec3 extent() const { return max - min; }
  double volume() const {
    const Vec3 e = extent();
    return e.x() * e.y() * e.z();
  }
  Vec3 center() const { return 0.5 * (min + max); }
  void expand_to(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
};

/// Finest resolution and hash table size from the local map volume:
/// N_max = floor(50 * V^(1/3)), H = N_max^2.
struct SubmapSizing {
  int n_max = 0;
  std::int64_t table_size = 0;
};
SubmapSizing submap_sizing_from_volume(double volume_m3);

/// Shared encoder hyperparameters (all submaps use the same values).
struct FieldConfig {
  int levels = 16;
  int base_res = 16;
  int feat_dim = 2;
  int hidden_dim = 32;
  double lr_hash = 1e-2;
  bool grid_hash = false;  // ablation: one 3D hash grid per field, 3x table
};

// Normalized in-box coordinates of p, then the (x,y), (x,z), (y,z) pairs.
std::array<std::array<double, 2>, 3> project_to_planes(const Vec3& p, const Aabb& bounds);

/// Scratch for one submap feature query (reused across samples). The three
/// sdf planes and three color planes share cell geometry, so one scratch per
/// orientation serves both fields.
struct SubmapQueryScratch {
  std::array<PlaneQueryScratch, 3> planes;
  GridQueryScratch grid;
  std::array<std::array<double, 2>, 3> uv;
  Vec3 grid_uvw;
  std::vector<double> tmp;
};

/// One bounded local map: three TSDF planes and three color planes (or one
/// 3D grid per field under --grid-hash).
class SubMap {
 public:
  SubMap(ParamStore& store, const Aabb& bounds, int creation_index, const FieldConfig& cfg,
         Rng& rng);
  SubMap(const SubMap& other);  // metadata copy; shares the same block ids
  SubMap& operator=(const SubMap&) = delete;

  const Aabb& bounds() const { return bounds_; }
  int creation_index() const { return creation_index_; }
  int n_max() const { return n_max_; }
  std::int64_t table_size() const { return table_size_; }
  int feature_length() const { return feat_len_; }
  bool grid_hash() const { return cfg_.grid_hash; }

  // F_s and F_c at world point p; caller buffers hold feature_length() doubles.
  void encode_features(const ParamStore& store, const Vec3& p, double* f_s, double* f_c,
                       SubmapQueryScratch& scratch) const;

  // Routes d_fs/d_fc into table gradients (when accumulate_tables) and into
  // a world-space position gradient added to *d_p (when non-null).
  void encode_backward(ParamStore& store, const SubmapQueryScratch& scratch, const double* d_fs,
                       const double* d_fc, Vec3* d_p, bool accumulate_tables) const;

  // Parameter blocks owned by this submap, for optimizer stepping.
  std::vector<BlockId> param_blocks() const;

  const HashPlane2D& sdf_plane(int i) const { return sdf_planes_[static_cast<std::size_t>(i)]; }
  const HashPlane2D& color_plane(int i) const { return color_planes_[static_cast<std::size_t>(i)]; }
  const HashGrid3D& sdf_grid() const { return *sdf_grid_; }
  const HashGrid3D& color_grid() const { return *color_grid_; }

  void set_recording(bool on) const;
  std::int64_t finest_collision_pairs() const;  // summed over planes (or the grid)

 private:
  Aabb bounds_;
  int creation_index_ = 0;
  FieldConfig cfg_;
  int n_max_ = 0;
  std::int64_t table_size_ = 0;
  int feat_len_ = 0;
  std::array<HashPlane2D, 3> sdf_planes_;
  std::array<HashPlane2D, 3> color_planes_;
  std::unique_ptr<HashGrid3D> sdf_grid_;
  std::unique_ptr<HashGrid3D> color_grid_;
};

/// The global decoder pair: f_s (scalar TSDF in truncation units, linear
/// output) and f_c (rgb through a sigmoid).
class Decoders {
 public:
  Decoders() = default;
  Decoders(ParamStore& store, int feature_length, int hidden_dim, double learning_rate, Rng& rng);

  struct Workspace {
    Mlp::Workspace sdf, color;
    double color_pre[3];  // pre-sigmoid outputs
  };

  // s unbounded (interpreted in truncation-distance units), c in (0,1)^3.
  void decode(const ParamStore& store, const double* f_s, const double* f_c, double* s, Vec3* c,
              Workspace& ws) const;

  // d_s / d_c: upstream gradients. Adds feature gradients into d_fs / d_fc
  // (length feature_length each); accumulates weight grads when requested.
  void decode_backward(ParamStore& store, const double* f_s, const double* f_c, const Vec3& c,
                       Workspace& ws, double d_s, const Vec3& d_c, double* d_fs, double* d_fc,
                       bool accumulate_weights) const;

  const Mlp& sdf_mlp() const { return f_s_; }
  const Mlp& color_mlp() const { return f_c_; }
  std::vector<BlockId> param_blocks() const { return {f_s_.block(), f_c_.block()}; }

 private:
  Mlp f_s_;
  Mlp f_c_;
};

}  // namespace trislam
