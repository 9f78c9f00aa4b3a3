#include "trislam/submap.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace trislam {

SubmapSizing submap_sizing_from_volume(double volume_m3) {
  if (!(volume_m3 > 0)) throw std::runtime_error("submap sizing: volume must be positive");
  SubmapSizing sizing;
  sizing.n_max = static_cast<int>(std::floor(50.0 * std::cbrt(volume_m3)));
  sizing.table_size = static_cast<std::int64_t>(sizing.n_max) * sizing.n_max;
  return sizing;
}

std::array<std::array<double, 2>, 3> project_to_planes(const Vec3& p, const Aabb& bounds) {
  const Vec3 e = bounds.extent();
  const Vec3 n((p.x() - bounds.min.x()) / e.x(), (p.y() - bounds.min.y()) / e.y(),
               (p.z() - bounds.min.z()) / e.z());
  return {{{n.x(), n.y()}, {n.x(), n.z()}, {n.y(), n.z()}}};
}

SubMap::SubMap(ParamStore& store, const Aabb& bounds, int creation_index, const FieldConfig& cfg,
               Rng& rng)
    : bounds_(bounds), creation_index_(creation_index), cfg_(cfg) {
  const Vec3 e = bounds.extent();
  if (!(e.x() > 0) || !(e.y() > 0) || !(e.z() > 0))
    throw std::runtime_error("submap: degenerate bounds (every side must be positive)");
  const SubmapSizing sizing = submap_sizing_from_volume(bounds.volume());
  n_max_ = sizing.n_max;
  table_size_ = sizing.table_size;
  feat_len_ = cfg.levels * cfg.feat_dim;
  const std::string prefix = "submap" + std::to_string(creation_index);
  if (cfg_.grid_hash) {
    sdf_grid_ = std::make_unique<HashGrid3D>(store, prefix + ".sdf.grid", cfg.base_res, n_max_,
                                             cfg.levels, cfg.feat_dim, 3 * table_size_,
                                             cfg.lr_hash, rng);
    color_grid_ = std::make_unique<HashGrid3D>(store, prefix + ".color.grid", cfg.base_res, n_max_,
                                               cfg.levels, cfg.feat_dim, 3 * table_size_,
                                               cfg.lr_hash, rng);
  } else {
    static const char* kPlaneNames[3] = {"xy", "xz", "yz"};
    for (int i = 0; i < 3; ++i) {
      sdf_planes_[static_cast<std::size_t>(i)] =
          HashPlane2D(store, prefix + ".sdf." + kPlaneNames[i], cfg.base_res, n_max_, cfg.levels,
                      cfg.feat_dim, table_size_, cfg.lr_hash, rng);
      color_planes_[static_cast<std::size_t>(i)] =
          HashPlane2D(store, prefix + ".color." + kPlaneNames[i], cfg.base_res, n_max_, cfg.levels,
                      cfg.feat_dim, table_size_, cfg.lr_hash, rng);
    }
  }
}

SubMap::SubMap(const SubMap& other)
    : bounds_(other.bounds_),
      creation_index_(other.creation_index_),
      cfg_(other.cfg_),
      n_max_(other.n_max_),
      table_size_(other.table_size_),
      feat_len_(other.feat_len_),
      sdf_planes_(other.sdf_planes_),
      color_planes_(other.color_planes_) {
  if (other.sdf_grid_) sdf_grid_ = std::make_unique<HashGrid3D>(*other.sdf_grid_);
  if (other.color_grid_) color_grid_ = std::make_unique<HashGrid3D>(*other.color_grid_);
}

void SubMap::encode_features(const ParamStore& store, const Vec3& p, double* f_s, double* f_c,
                             SubmapQueryScratch& scratch) const {
  if (cfg_.grid_hash) {
    const Vec3 e = bounds_.extent();
    scratch.grid_uvw = Vec3((p.x() - bounds_.min.x()) / e.x(), (p.y() - bounds_.min.y()) / e.y(),
                            (p.z() - bounds_.min.z()) / e.z());
    sdf_grid_->encode(store, scratch.grid_uvw.x(), scratch.grid_uvw.y(), scratch.grid_uvw.z(), f_s,
                      scratch.grid);
    // The color grid shares cell geometry, so the scratch is simply refilled
    // with identical hits.
    color_grid_->encode(store, scratch.grid_uvw.x(), scratch.grid_uvw.y(), scratch.grid_uvw.z(),
                        f_c, scratch.grid);
    return;
  }
  scratch.uv = project_to_planes(p, bounds_);
  for (int i = 0; i < feat_len_; ++i) {
    f_s[i] = 0.0;
    f_c[i] = 0.0;
  }
  scratch.tmp.resize(static_cast<std::size_t>(feat_len_));
  double* tmp = scratch.tmp.data();
  for (int pl = 0; pl < 3; ++pl) {
    const auto& uv = scratch.uv[static_cast<std::size_t>(pl)];
    auto& plane_scratch = scratch.planes[static_cast<std::size_t>(pl)];
    sdf_planes_[static_cast<std::size_t>(pl)].encode(store, uv[0], uv[1], tmp, plane_scratch);
    for (int i = 0; i < feat_len_; ++i) f_s[i] += tmp[i];
    // Same geometry for the color plane of this orientation.
    color_planes_[static_cast<std::size_t>(pl)].encode(store, uv[0], uv[1], tmp, plane_scratch);
    for (int i = 0; i < feat_len_; ++i) f_c[i] += tmp[i];
  }
}

void SubMap::encode_backward(ParamStore& store, const SubmapQueryScratch& scratch,
                             const double* d_fs, const double* d_fc, Vec3* d_p,
                             bool accumulate_tables) const {
  const Vec3 e = bounds_.extent();
  if (cfg_.grid_hash) {
    double du = 0, dv = 0, dw = 0;
    sdf_grid_->backward(store, scratch.grid, d_fs, d_p ? &du : nullptr, d_p ? &dv : nullptr,
                        d_p ? &dw : nullptr, accumulate_tables);
    color_grid_->backward(store, scratch.grid, d_fc, d_p ? &du : nullptr, d_p ? &dv : nullptr,
                          d_p ? &dw : nullptr, accumulate_tables);
    if (d_p) *d_p += Vec3(du / e.x(), dv / e.y(), dw / e.z());
    return;
  }
  // Plane axis pairs: (x,y), (x,z), (y,z).
  static const int kAxisU[3] = {0, 0, 1};
  static const int kAxisV[3] = {1, 2, 2};
  Vec3 dp_local = Vec3::Zero();
  for (int pl = 0; pl < 3; ++pl) {
    double du = 0, dv = 0;
    const auto& sc = scratch.planes[static_cast<std::size_t>(pl)];
    sdf_planes_[static_cast<std::size_t>(pl)].backward(store, sc, d_fs, d_p ? &du : nullptr,
                                                       d_p ? &dv : nullptr, accumulate_tables);
    color_planes_[static_cast<std::size_t>(pl)].backward(store, sc, d_fc, d_p ? &du : nullptr,
                                                         d_p ? &dv : nullptr, accumulate_tables);
    if (d_p) {
      dp_local[kAxisU[pl]] += du / e[kAxisU[pl]];
      dp_local[kAxisV[pl]] += dv / e[kAxisV[pl]];
    }
  }
  if (d_p) *d_p += dp_local;
}

std::vector<BlockId> SubMap::param_blocks() const {
  std::vector<BlockId> ids;
  if (cfg_.grid_hash) {
    ids.push_back(sdf_grid_->block());
    ids.push_back(color_grid_->block());
  } else {
    for (int i = 0; i < 3; ++i) {
      ids.push_back(sdf_planes_[static_cast<std::size_t>(i)].block());
      ids.push_back(color_planes_[static_cast<std::size_t>(i)].block());
    }
  }
  return ids;
}

void SubMap::set_recording(bool on) const {
  if (cfg_.grid_hash) {
    sdf_grid_->set_recording(on);
    color_grid_->set_recording(on);
  } else {
    for (int i = 0; i < 3; ++i) {
      sdf_planes_[static_cast<std::size_t>(i)].set_recording(on);
      color_planes_[static_cast<std::size_t>(i)].set_recording(on);
    }
  }
}

std::int64_t SubMap::finest_collision_pairs() const {
  if (cfg_.grid_hash) return sdf_grid_->collision_pairs();
  std::int64_t total = 0;
  for (int i = 0; i < 3; ++i) total += sdf_planes_[static_cast<std::size_t>(i)].collision_pairs();
  return total;
}

Decoders::Decoders(ParamStore& store, int feature_length, int hidden_dim, double learning_rate,
                   Rng& rng)
    : f_s_(store, "decoder.sdf", feature_length, hidden_dim, 1, learning_rate, rng),
      f_c_(store, "decoder.color", feature_length, hidden_dim, 3, learning_rate, rng) {
  // Free-space prior: with near-zero features the field reads as empty
  // space, so unobserved regions do not sprout surfaces.
  f_s_.b3(store)[0] = 1.0;
}

void Decoders::decode(const ParamStore& store, const double* f_s, const double* f_c, double* s,
                      Vec3* c, Workspace& ws) const {
  f_s_.forward(store, f_s, s, ws.sdf);
  f_c_.forward(store, f_c, ws.color_pre, ws.color);
  for (int i = 0; i < 3; ++i) (*c)[i] = 1.0 / (1.0 + std::exp(-ws.color_pre[i]));
}

void Decoders::decode_backward(ParamStore& store, const double* f_s, const double* f_c,
                               const Vec3& c, Workspace& ws, double d_s, const Vec3& d_c,
                               double* d_fs, double* d_fc, bool accumulate_weights) const {
  f_s_.backward(store, f_s, ws.sdf, &d_s, d_fs, accumulate_weights);
  double d_pre[3];
  for (int i = 0; i < 3; ++i) d_pre[i] = d_c[i] * c[i] * (1.0 - c[i]);
  f_c_.backward(store, f_c, ws.color, d_pre, d_fc, accumulate_weights);
}

}  // namespace trislam
