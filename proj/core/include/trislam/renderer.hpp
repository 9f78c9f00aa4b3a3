#pragma once

#include <vector>

#include "trislam/geometry.hpp"
#include "trislam/rng.hpp"

namespace trislam {

enum class SampleKind : std::uint8_t { Regular, NearSurface };

/// Sorted z-depths along one ray. Near-surface samples may leave [near, far]
/// (they are only clamped to >= near).
struct RaySamples {
  std::vector<double> depths;
  std::vector<SampleKind> kinds;
  double near = 0, far = 0;

  std::size_t size() const { return depths.size(); }
};

// N_g stratified samples over [near, far] (one uniform draw per equal-width
// bin) merged with N_d uniform draws over [gt_depth - trunc, gt_depth +
// trunc]. Invalid gt_depth (<= 0) skips the near-surface part.
RaySamples sample_ray_depths(double gt_depth, double near, double far, int n_g, int n_d,
                             double trunc, Rng& rng);

// Density conversion sigma = beta * sigmoid(-beta * s). Requires beta > 0.
double sdf_to_density(double s, double beta);
// Partials of sigma with respect to s and beta.
void sdf_to_density_grad(double s, double beta, double* d_s, double* d_beta);

// omega_n = exp(-sum_{k<n} sigma_k) * (1 - exp(-sigma_n)). Writes both the
// weights and the post-sample transmittances T_n = exp(-sum_{k<=n} sigma_k).
void compute_weights(const std::vector<double>& sigma, std::vector<double>& omega,
                     std::vector<double>& transmittance);

// Chain rule through the weight recursion: given dL/d(omega), accumulates
// dL/d(sigma). All vectors share the sample count.
void weights_backward(const std::vector<double>& sigma, const std::vector<double>& omega,
                      const std::vector<double>& transmittance,
                      const std::vector<double>& d_omega, std::vector<double>& d_sigma);

/// Rendered color/depth with the per-sample quantities kept for inspection.
struct RenderResult {
  Vec3 c_hat{0, 0, 0};
  double d_hat = 0;
  std::vector<double> s;
  std::vector<double> sigma;
  std::vector<double> omega;
};

// Pure weighted-sum rendering of per-sample field values (Eq.-style volume
// rendering without a spacing term). `s` and `colors` are indexed like
// samples.depths.
RenderResult render_ray(const RaySamples& samples, const std::vector<double>& s,
                        const std::vector<Vec3>& colors, double beta);

}  // namespace trislam
