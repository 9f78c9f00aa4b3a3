#pragma once

#include <vector>

#include "trislam/geometry.hpp"

namespace trislam {

struct LossWeights {
  double rgb = 5.0;
  double depth = 0.1;
  double fs = 10.0;
  double mid = 200.0;
  double tail = 10.0;
  // Paper-literal TSDF residual (s + d_r - d_p, meters) instead of the
  // truncation-normalized (s - (d_r - d_p)/trunc).
  bool paper_literal_tsdf = false;
};

/// Disjoint per-ray sample index sets: free space, middle band, tail band.
struct SampleClasses {
  std::vector<int> fs;
  std::vector<int> mid;
  std::vector<int> tail;
};

// fs: |d_p - d_r| > trunc; mid: |d_p - d_r| <= 0.4*trunc; tail: the rest up
// to trunc (inclusive).
SampleClasses classify_samples(const std::vector<double>& sample_depths, double ray_depth,
                               double trunc);

struct LossValues {
  double rgb = 0;
  double depth = 0;
  double fs = 0;
  double mid = 0;
  double tail = 0;
  double tsdf() const { return mid + tail; }
};

// Batch-mean photometric losses; color error is additionally averaged over
// the 3 channels. Throws on an empty batch.
void photometric_losses(const std::vector<Vec3>& rendered_color,
                        const std::vector<double>& rendered_depth,
                        const std::vector<Vec3>& gt_color, const std::vector<double>& gt_depth,
                        double* l_rgb, double* l_depth);

// Per-ray free-space and banded TSDF losses for one ray; contributions are
// already divided by the set sizes but NOT by |R| (callers average). The
// TSDF target is (d_r - d_p)/trunc, or the paper-literal residual under the
// flag.
struct RaySdfLosses {
  double fs = 0;
  double mid = 0;  // lambda_mid folded in
  double tail = 0;
};
RaySdfLosses sdf_losses(const std::vector<double>& s, const SampleClasses& classes,
                        const std::vector<double>& sample_depths, double ray_depth, double trunc,
                        const LossWeights& weights);

// Weighted total: rgb*L_rgb + depth*L_depth + fs*L_fs + (L_mid + L_tail).
// Throws when a component is non-finite, naming it.
double total_loss(const LossValues& values, const LossWeights& weights);

}  // namespace trislam
