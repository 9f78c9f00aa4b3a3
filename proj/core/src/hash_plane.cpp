#include "trislam/hash_plane.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace trislam {

std::vector<int> level_resolutions(int n_min, int n_max, int levels) {
  if (n_min < 1) throw std::runtime_error("level_resolutions: N_min must be >= 1");
  if (n_max < n_min) throw std::runtime_error("level_resolutions: N_max < N_min");
  if (levels < 2) throw std::runtime_error("level_resolutions: need at least 2 levels");
  const double ratio = static_cast<double>(n_max) / n_min;
  std::vector<int> res(static_cast<std::size_t>(levels));
  for (int l = 0; l < levels; ++l) {
    const double growth = std::pow(ratio, static_cast<double>(l) / (levels - 1));
    res[static_cast<std::size_t>(l)] = static_cast<int>(std::floor(n_min * growth + 1e-9));
  }
  return res;
}

HashPlane2D::HashPlane2D(ParamStore& store, const std::string& block_name, int n_min, int n_max,
                         int levels, int feat_dim, std::int64_t table_size, double learning_rate,
                         Rng& rng, bool force_hashed)
    : feat_dim_(feat_dim), table_size_(table_size) {
  if (table_size < 1) throw std::runtime_error("hash plane: table size must be >= 1");
  const auto res = level_resolutions(n_min, n_max, levels);
  std::int64_t total_entries = 0;
  levels_.reserve(res.size());
  for (int r : res) {
    Level level;
    level.res = r;
    const std::int64_t dense_entries =
        static_cast<std::int64_t>(r + 1) * static_cast<std::int64_t>(r + 1);
    level.dense = !force_hashed && dense_entries <= table_size;
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

std::int64_t HashPlane2D::hash_index(int level, int ix, int iy) const {
  const Level& lv = levels_[static_cast<std::size_t>(level)];
  if (ix < 0 || iy < 0 || ix > lv.res || iy > lv.res)
    throw std::runtime_error("hash_index: vertex outside [0, N_l]");
  if (lv.dense) return lv.offset + static_cast<std::int64_t>(iy) * (lv.res + 1) + ix;
  const std::uint64_t h = (static_cast<std::uint64_t>(ix) * kHashPrimeX) ^
                          (static_cast<std::uint64_t>(iy) * kHashPrimeY);
  return lv.offset + static_cast<std::int64_t>(h % static_cast<std::uint64_t>(table_size_));
}

void HashPlane2D::encode(const ParamStore& store, double u, double v, double* out,
                         PlaneQueryScratch& scratch) const {
  u = std::clamp(u, 0.0, 1.0);
  v = std::clamp(v, 0.0, 1.0);
  const auto& values = store.block(block_).values;
  const int n_levels = levels();
  scratch.hits.resize(static_cast<std::size_t>(n_levels));
  for (int l = 0; l < n_levels; ++l) {
    const Level& lv = levels_[static_cast<std::size_t>(l)];
    const double x = u * lv.res;
    const double y = v * lv.res;
    const int ix = std::min(static_cast<int>(x), lv.res - 1);
    const int iy = std::min(static_cast<int>(y), lv.res - 1);
    auto& hit = scratch.hits[static_cast<std::size_t>(l)];
    hit.fx = x - ix;
    hit.fy = y - iy;
    hit.idx[0] = hash_index(l, ix, iy);
    hit.idx[1] = hash_index(l, ix + 1, iy);
    hit.idx[2] = hash_index(l, ix, iy + 1);
    hit.idx[3] = hash_index(l, ix + 1, iy + 1);
    if (recording_ && l == n_levels - 1) {
      occupied_finest_.insert((static_cast<std::uint64_t>(ix) << 32) | static_cast<std::uint64_t>(iy));
      occupied_finest_.insert((static_cast<std::uint64_t>(ix + 1) << 32) | static_cast<std::uint64_t>(iy));
      occupied_finest_.insert((static_cast<std::uint64_t>(ix) << 32) | static_cast<std::uint64_t>(iy + 1));
      occupied_finest_.insert((static_cast<std::uint64_t>(ix + 1) << 32) | static_cast<std::uint64_t>(iy + 1));
    }
    const double w00 = (1.0 - hit.fx) * (1.0 - hit.fy);
    const double w10 = hit.fx * (1.0 - hit.fy);
    const double w01 = (1.0 - hit.fx) * hit.fy;
    const double w11 = hit.fx * hit.fy;
    const double* t00 = &values[static_cast<std::size_t>(hit.idx[0] * feat_dim_)];
    const double* t10 = &values[static_cast<std::size_t>(hit.idx[1] * feat_dim_)];
    const double* t01 = &values[static_cast<std::size_t>(hit.idx[2] * feat_dim_)];
    const double* t11 = &values[static_cast<std::size_t>(hit.idx[3] * feat_dim_)];
    double* dst = out + static_cast<std::ptrdiff_t>(l) * feat_dim_;
    for (int c = 0; c < feat_dim_; ++c)
      dst[c] = w00 * t00[c] + w10 * t10[c] + w01 * t01[c] + w11 * t11[c];
  }
}

void HashPlane2D::backward(ParamStore& store, const PlaneQueryScratch& scratch,
                           const double* d_feat, double* du, double* dv,
                           bool accumulate_tables) const {
  auto& block = store.block(block_);
  const auto& values = block.values;
  auto& grads = block.grads;
  const int n_levels = levels();
  for (int l = 0; l < n_levels; ++l) {
    const Level& lv = levels_[static_cast<std::size_t>(l)];
    const auto& hit = scratch.hits[static_cast<std::size_t>(l)];
    const double w00 = (1.0 - hit.fx) * (1.0 - hit.fy);
    const double w10 = hit.fx * (1.0 - hit.fy);
    const double w01 = (1.0 - hit.fx) * hit.fy;
    const double w11 = hit.fx * hit.fy;
    const double* g = d_feat + static_cast<std::ptrdiff_t>(l) * feat_dim_;
    if (accumulate_tables) {
      double* g00 = &grads[static_cast<std::size_t>(hit.idx[0] * feat_dim_)];
      double* g10 = &grads[static_cast<std::size_t>(hit.idx[1] * feat_dim_)];
      double* g01 = &grads[static_cast<std::size_t>(hit.idx[2] * feat_dim_)];
      double* g11 = &grads[static_cast<std::size_t>(hit.idx[3] * feat_dim_)];
      for (int c = 0; c < feat_dim_; ++c) {
        g00[c] += w00 * g[c];
        g10[c] += w10 * g[c];
        g01[c] += w01 * g[c];
        g11[c] += w11 * g[c];
      }
    }
    if (du || dv) {
      const double* t00 = &values[static_cast<std::size_t>(hit.idx[0] * feat_dim_)];
      const double* t10 = &values[static_cast<std::size_t>(hit.idx[1] * feat_dim_)];
      const double* t01 = &values[static_cast<std::size_t>(hit.idx[2] * feat_dim_)];
      const double* t11 = &values[static_cast<std::size_t>(hit.idx[3] * feat_dim_)];
      double acc_x = 0.0, acc_y = 0.0;
      for (int c = 0; c < feat_dim_; ++c) {
        // d(bilinear)/dx and /dy in cell units
        acc_x += g[c] * ((1.0 - hit.fy) * (t10[c] - t00[c]) + hit.fy * (t11[c] - t01[c]));
        acc_y += g[c] * ((1.0 - hit.fx) * (t01[c] - t00[c]) + hit.fx * (t11[c] - t10[c]));
      }
      if (du) *du += acc_x * lv.res;
      if (dv) *dv += acc_y * lv.res;
    }
  }
}

std::int64_t HashPlane2D::occupied_vertex_count() const {
  return static_cast<std::int64_t>(occupied_finest_.size());
}

std::int64_t HashPlane2D::collision_pairs() const {
  if (levels_.empty() || occupied_finest_.empty()) return 0;
  const int finest = levels() - 1;
  std::unordered_map<std::int64_t, std::int64_t> slot_counts;
  slot_counts.reserve(occupied_finest_.size());
  for (std::uint64_t packed : occupied_finest_) {
    const int ix = static_cast<int>(packed >> 32);
    const int iy = static_cast<int>(packed & 0xffffffffULL);
    slot_counts[hash_index(finest, ix, iy)] += 1;
  }
  std::int64_t pairs = 0;
  for (const auto& [slot, k] : slot_counts) pairs += k * (k - 1) / 2;
  return pairs;
}

}  // namespace trislam
