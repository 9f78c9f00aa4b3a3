#pragma once

#include <cstdint>
#include <unordered_set>
#include <vector>

#include "trislam/param_store.hpp"

namespace trislam {

/// Scratch for one 3D grid query.
struct GridQueryScratch {
  struct LevelHit {
    double fx, fy, fz;
    std::int64_t idx[8];  // (x,y,z) bit order: bit0=x+1, bit1=y+1, bit2=z+1
  };
  std::vector<LevelHit> hits;
};

/// Multi-resolution 3D hash grid, the `--grid-hash` ablation counterpart of
/// the tri-plane. Same level progression; trilinear interpolation; levels
/// dense while (N_l+1)^3 fits the table.
class HashGrid3D {
 public:
  HashGrid3D() = default;
  HashGrid3D(ParamStore& store, const std::string& block_name, int n_min, int n_max, int levels,
             int feat_dim, std::int64_t table_size, double learning_rate, Rng& rng);

  int levels() const { return static_cast<int>(levels_.size()); }
  int feature_length() const { return levels() * feat_dim_; }
  BlockId block() const { return block_; }

  std::int64_t hash_index(int level, int ix, int iy, int iz) const;

  void encode(const ParamStore& store, double u, double v, double w, double* out,
              GridQueryScratch& scratch) const;
  void backward(ParamStore& store, const GridQueryScratch& scratch, const double* d_feat,
                double* du, double* dv, double* dw, bool accumulate_tables) const;

  void set_recording(bool on) const { recording_ = on; }
  std::int64_t occupied_vertex_count() const;
  std::int64_t collision_pairs() const;

 private:
  struct Level {
    int res = 0;
    bool dense = false;
    std::int64_t entries = 0;
    std::int64_t offset = 0;
  };
  std::vector<Level> levels_;
  int feat_dim_ = 0;
  std::int64_t table_size_ = 0;
  BlockId block_ = -1;

  mutable bool recording_ = false;
  mutable std::unordered_set<std::uint64_t> occupied_finest_;
};

}  // namespace trislam
