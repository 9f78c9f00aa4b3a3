#include "trislam/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace trislam {

SampleClasses classify_samples(const std::vector<double>& sample_depths, double ray_depth,
                               double trunc) {
  SampleClasses out;
  for (int i = 0; i < static_cast<int>(sample_depths.size()); ++i) {
    const double offset = std::abs(sample_depths[static_cast<std::size_t>(i)] - ray_depth);
    if (offset > trunc)
      out.fs.push_back(i);
    else if (offset <= 0.4 * trunc)
      out.mid.push_back(i);
    else
      out.tail.push_back(i);
  }
  return out;
}

void photometric_losses(const std::vector<Vec3>& rendered_color,
                        const std::vector<double>& rendered_depth,
                        const std::vector<Vec3>& gt_color, const std::vector<double>& gt_depth,
                        double* l_rgb, double* l_depth) {
  const std::size_t n = rendered_color.size();
  if (n == 0) throw std::runtime_error("photometric_losses: empty ray batch");
  double rgb = 0, depth = 0;
  for (std::size_t i = 0; i < n; ++i) {
    rgb += (rendered_color[i] - gt_color[i]).squaredNorm() / 3.0;
    const double dd = rendered_depth[i] - gt_depth[i];
    depth += dd * dd;
  }
  *l_rgb = rgb / static_cast<double>(n);
  *l_depth = depth / static_cast<double>(n);
}

RaySdfLosses sdf_losses(const std::vector<double>& s, const SampleClasses& classes,
                        const std::vector<double>& sample_depths, double ray_depth, double trunc,
                        const LossWeights& weights) {
  RaySdfLosses out;
  auto tsdf_residual = [&](int i) {
    const double d_p = sample_depths[static_cast<std::size_t>(i)];
    if (weights.paper_literal_tsdf) return s[static_cast<std::size_t>(i)] + ray_depth - d_p;
    return s[static_cast<std::size_t>(i)] - (ray_depth - d_p) / trunc;
  };
  if (!classes.fs.empty()) {
    double acc = 0;
    for (int i : classes.fs) {
      const double r = s[static_cast<std::size_t>(i)] - 1.0;
      acc += r * r;
    }
    out.fs = acc / static_cast<double>(classes.fs.size());
  }
  if (!classes.mid.empty()) {
    double acc = 0;
    for (int i : classes.mid) {
      const double r = tsdf_residual(i);
      acc += r * r;
    }
    out.mid = weights.mid * acc / static_cast<double>(classes.mid.size());
  }
  if (!classes.tail.empty()) {
    double acc = 0;
    for (int i : classes.tail) {
      const double r = tsdf_residual(i);
      acc += r * r;
    }
    out.tail = weights.tail * acc / static_cast<double>(classes.tail.size());
  }
  return out;
}

double total_loss(const LossValues& values, const LossWeights& weights) {
  auto check = [](double v, const char* name) {
    if (!std::isfinite(v)) throw std::runtime_error(std::string("non-finite loss component: ") + name);
  };
  check(values.rgb, "L_rgb");
  check(values.depth, "L_depth");
  check(values.fs, "L_fs");
  check(values.mid, "L_mid");
  check(values.tail, "L_tail");
  return weights.rgb * values.rgb + weights.depth * values.depth + weights.fs * values.fs +
         values.mid + values.tail;
}

}  // namespace trislam
