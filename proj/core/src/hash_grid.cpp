#include "trislam/hash_grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "trislam/hash_plane.hpp"

namespace trislam {

HashGrid3D::HashGrid3D(ParamStore& store, const std::string& block_name, int n_min, int n_max,
                       int levels, int feat_dim, std::int64_t table_size, double learning_rate,
                       Rng& rng)
    : feat_dim_(feat_dim), table_size_(table_size) {
  if (table_size < 1) throw std::runtime_error("hash grid: table size must be >= 1");
  const auto res = level_resolutions(n_min, n_max, levels);
  std::int64_t total_entries = 0;
  levels_.reserve(res.size());
  for (int r : res) {
    Level level;
    level.res = r;
    const std::int64_t side = r + 1;
    const std::int64_t dense_entries = side * side * side;
    level.dense = dense_entries <= table_size;
    level.entries = level.dense ? dense_entries : table_size;
    level.offset = total_entries;
    total_entries += level.entries;
    levels_.push_back(level);
  }
  block_ = store.add_block(block_name, static_cast<std::size_t>(total_entries * feat_dim),
                           learning_rate);
  auto& values = store.block(block_).values;
  for (double& v : values) v = rng.uniform(-1e-4, 1e-4);
  maybe_quantize(store.block(block_));
}

std::int64_t HashGrid3D::hash_index(int level, int ix, int iy, int iz) const {
  const Level& lv = levels_[static_cast<std::size_t>(level)];
  if (ix < 0 || iy < 0 || iz < 0 || ix > lv.res || iy > lv.res || iz > lv.res)
    throw std::runtime_error("hash_index: vertex outside [0, N_l]");
  if (lv.dense) {
    const std::int64_t side = lv.res + 1;
    return lv.offset + (static_cast<std::int64_t>(iz) * side + iy) * side + ix;
  }
  const std::uint64_t h = (static_cast<std::uint64_t>(ix) * kHashPrimeX) ^
                          (static_cast<std::uint64_t>(iy) * kHashPrimeY) ^
                          (static_cast<std::uint64_t>(iz) * kHashPrimeZ);
  return lv.offset + static_cast<std::int64_t>(h % static_cast<std::uint64_t>(table_size_));
}

void HashGrid3D::encode(const ParamStore& store, double u, double v, double w, double* out,
                        GridQueryScratch& scratch) const {
  u = std::clamp(u, 0.0, 1.0);
  v = std::clamp(v, 0.0, 1.0);
  w = std::clamp(w, 0.0, 1.0);
  const auto& values = store.block(block_).values;
  const int n_levels = levels();
  scratch.hits.resize(static_cast<std::size_t>(n_levels));
  for (int l = 0; l < n_levels; ++l) {
    const Level& lv = levels_[static_cast<std::size_t>(l)];
    const double x = u * lv.res, y = v * lv.res, z = w * lv.res;
    const int ix = std::min(static_cast<int>(x), lv.res - 1);
    const int iy = std::min(static_cast<int>(y), lv.res - 1);
    const int iz = std::min(static_cast<int>(z), lv.res - 1);
    auto& hit = scratch.hits[static_cast<std::size_t>(l)];
    hit.fx = x - ix;
    hit.fy = y - iy;
    hit.fz = z - iz;
    for (int corner = 0; corner < 8; ++corner) {
      const int cx = ix + (corner & 1);
      const int cy = iy + ((corner >> 1) & 1);
      const int cz = iz + ((corner >> 2) & 1);
      hit.idx[corner] = hash_index(l, cx, cy, cz);
      if (recording_ && l == n_levels - 1) {
        occupied_finest_.insert((static_cast<std::uint64_t>(cx) << 42) |
                                (static_cast<std::uint64_t>(cy) << 21) |
                                static_cast<std::uint64_t>(cz));
      }
    }
    double* dst = out + static_cast<std::ptrdiff_t>(l) * feat_dim_;
    for (int c = 0; c < feat_dim_; ++c) dst[c] = 0.0;
    for (int corner = 0; corner < 8; ++corner) {
      const double wx = (corner & 1) ? hit.fx : 1.0 - hit.fx;
      const double wy = ((corner >> 1) & 1) ? hit.fy : 1.0 - hit.fy;
      const double wz = ((corner >> 2) & 1) ? hit.fz : 1.0 - hit.fz;
      const double weight = wx * wy * wz;
      const double* src = &values[static_cast<std::size_t>(hit.idx[corner] * feat_dim_)];
      for (int c = 0; c < feat_dim_; ++c) dst[c] += weight * src[c];
    }
  }
}

void HashGrid3D::backward(ParamStore& store, const GridQueryScratch& scratch, const double* d_feat,
                          double* du, double* dv, double* dw, bool accumulate_tables) const {
  auto& block = store.block(block_);
  const auto& values = block.values;
  auto& grads = block.grads;
  const int n_levels = levels();
  for (int l = 0; l < n_levels; ++l) {
    const Level& lv = levels_[static_cast<std::size_t>(l)];
    const auto& hit = scratch.hits[static_cast<std::size_t>(l)];
    const double* g = d_feat + static_cast<std::ptrdiff_t>(l) * feat_dim_;
    double acc_x = 0.0, acc_y = 0.0, acc_z = 0.0;
    for (int corner = 0; corner < 8; ++corner) {
      const bool bx = corner & 1, by = (corner >> 1) & 1, bz = (corner >> 2) & 1;
      const double wx = bx ? hit.fx : 1.0 - hit.fx;
      const double wy = by ? hit.fy : 1.0 - hit.fy;
      const double wz = bz ? hit.fz : 1.0 - hit.fz;
      const double sx = bx ? 1.0 : -1.0;
      const double sy = by ? 1.0 : -1.0;
      const double sz = bz ? 1.0 : -1.0;
      const double weight = wx * wy * wz;
      const double* src = &values[static_cast<std::size_t>(hit.idx[corner] * feat_dim_)];
      double dot = 0.0;
      for (int c = 0; c < feat_dim_; ++c) dot += g[c] * src[c];
      acc_x += dot * sx * wy * wz;
      acc_y += dot * wx * sy * wz;
      acc_z += dot * wx * wy * sz;
      if (accumulate_tables) {
        double* dst = &grads[static_cast<std::size_t>(hit.idx[corner] * feat_dim_)];
        for (int c = 0; c < feat_dim_; ++c) dst[c] += weight * g[c];
      }
    }
    if (du) *du += acc_x * lv.res;
    if (dv) *dv += acc_y * lv.res;
    if (dw) *dw += acc_z * lv.res;
  }
}

std::int64_t HashGrid3D::occupied_vertex_count() const {
  return static_cast<std::int64_t>(occupied_finest_.size());
}

std::int64_t HashGrid3D::collision_pairs() const {
  if (levels_.empty() || occupied_finest_.empty()) return 0;
  const int finest = levels() - 1;
  std::unordered_map<std::int64_t, std::int64_t> slot_counts;
  slot_counts.reserve(occupied_finest_.size());
  for (std::uint64_t packed : occupied_finest_) {
    const int ix = static_cast<int>(packed >> 42);
    const int iy = static_cast<int>((packed >> 21) & 0x1fffffULL);
    const int iz = static_cast<int>(packed & 0x1fffffULL);
    slot_counts[hash_index(finest, ix, iy, iz)] += 1;
  }
  std::int64_t pairs = 0;
  for (const auto& [slot, k] : slot_counts) pairs += k * (k - 1) / 2;
  return pairs;
}

}  // namespace trislam
