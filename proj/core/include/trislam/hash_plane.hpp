#pragma once

#include <cstdint>
#include <unordered_set>
#include <vector>

#include "trislam/param_store.hpp"

namespace trislam {

// Instant-NGP 2D hash convention.
inline constexpr std::uint64_t kHashPrimeX = 1;
inline constexpr std::uint64_t kHashPrimeY = 2654435761ULL;
inline constexpr std::uint64_t kHashPrimeZ = 805459861ULL;

// Geometric level progression N_l = floor(N_min * b^l) with
// b = (N_max/N_min)^(1/(L-1)). Throws when n_max < n_min.
std::vector<int> level_resolutions(int n_min, int n_max, int levels);

/// Scratch for one encode2d call, reused across samples. Holds everything
/// backward needs so no hashing is redone.
struct PlaneQueryScratch {
  struct LevelHit {
    double fx, fy;          // in-cell fractions
    std::int64_t idx[4];    // table entries of (ix,iy),(ix+1,iy),(ix,iy+1),(ix+1,iy+1)
  };
  std::vector<LevelHit> hits;
};

/// Multi-resolution 2D feature plane. Levels whose dense vertex grid fits in
/// the table ((N_l+1)^2 <= H) are stored dense; the rest share H hashed
/// slots. Output feature length is levels * feat_dim.
class HashPlane2D {
 public:
  HashPlane2D() = default;
  HashPlane2D(ParamStore& store, const std::string& block_name, int n_min, int n_max, int levels,
              int feat_dim, std::int64_t table_size, double learning_rate, Rng& rng,
              bool force_hashed = false);

  int levels() const { return static_cast<int>(levels_.size()); }
  int feat_dim() const { return feat_dim_; }
  int feature_length() const { return levels() * feat_dim_; }
  std::int64_t table_size() const { return table_size_; }
  BlockId block() const { return block_; }
  int level_resolution(int level) const { return levels_[level].res; }
  bool level_dense(int level) const { return levels_[level].dense; }

  // Table index of a vertex. Throws when (ix,iy) lies outside [0, N_l]^2.
  std::int64_t hash_index(int level, int ix, int iy) const;

  // Bilinear multi-level encoding of (u,v) in [0,1]^2 (inputs clamped).
  // Writes feature_length() doubles to `out` and fills `scratch`.
  void encode(const ParamStore& store, double u, double v, double* out,
              PlaneQueryScratch& scratch) const;

  // Distributes `d_feat` (length feature_length()) to the table gradient
  // buffer when accumulate_tables is set, and adds d(feature)/d(u,v)
  // contributions onto (*du, *dv) when those are non-null.
  void backward(ParamStore& store, const PlaneQueryScratch& scratch, const double* d_feat,
                double* du, double* dv, bool accumulate_tables) const;

  // Occupancy instrumentation for collision diagnostics. While recording,
  // encode() remembers which finest-level vertices were touched.
  void set_recording(bool on) const { recording_ = on; }
  std::int64_t occupied_vertex_count() const;
  // Pairs of recorded finest-level vertices that share one table slot.
  std::int64_t collision_pairs() const;

 private:
  struct Level {
    int res = 0;
    bool dense = false;
    std::int64_t entries = 0;
    std::int64_t offset = 0;  // entry offset into the block
  };
  std::vector<Level> levels_;
  int feat_dim_ = 0;
  std::int64_t table_size_ = 0;
  BlockId block_ = -1;

  mutable bool recording_ = false;
  mutable std::unordered_set<std::uint64_t> occupied_finest_;
};

}  // namespace trislam
