#include "trislam/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace trislam {

RaySamples sample_ray_depths(double gt_depth, double near, double far, int n_g, int n_d,
                             double trunc, Rng& rng) {
  if (!(far > near)) throw std::runtime_error("sample_ray_depths: far must exceed near");
  RaySamples out;
  out.near = near;
  out.far = far;
  const bool depth_valid = gt_depth > 0.0;
  const std::size_t total = static_cast<std::size_t>(n_g) + (depth_valid ? n_d : 0);
  out.depths.reserve(total);
  out.kinds.reserve(total);
  const double bin = (far - near) / n_g;
  for (int i = 0; i < n_g; ++i) {
    out.depths.push_back(near + (i + rng.uniform()) * bin);
    out.kinds.push_back(SampleKind::Regular);
  }
  if (depth_valid) {
    for (int i = 0; i < n_d; ++i) {
      const double d = gt_depth + trunc * (2.0 * rng.uniform() - 1.0);
      out.depths.push_back(std::max(d, near));
      out.kinds.push_back(SampleKind::NearSurface);
    }
  }
  // Sort depths and kinds together.
  std::vector<std::size_t> order(out.depths.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return out.depths[a] < out.depths[b]; });
  RaySamples sorted;
  sorted.near = near;
  sorted.far = far;
  sorted.depths.reserve(order.size());
  sorted.kinds.reserve(order.size());
  for (std::size_t i : order) {
    sorted.depths.push_back(out.depths[i]);
    sorted.kinds.push_back(out.kinds[i]);
  }
  return sorted;
}

double sdf_to_density(double s, double beta) {
  if (!(beta > 0)) throw std::runtime_error("sdf_to_density: beta must be positive");
  return beta / (1.0 + std::exp(beta * s));
}

void sdf_to_density_grad(double s, double beta, double* d_s, double* d_beta) {
  const double sig = 1.0 / (1.0 + std::exp(beta * s));  // sigmoid(-beta*s)
  const double dsig = sig * (1.0 - sig);
  if (d_s) *d_s = -beta * beta * dsig;
  if (d_beta) *d_beta = sig - beta * s * dsig;
}

void compute_weights(const std::vector<double>& sigma, std::vector<double>& omega,
                     std::vector<double>& transmittance) {
  const std::size_t n = sigma.size();
  omega.resize(n);
  transmittance.resize(n);
  double log_t = 0.0;  // log of transmittance before the current sample
  for (std::size_t i = 0; i < n; ++i) {
    const double t_before = std::exp(log_t);
    omega[i] = t_before * (1.0 - std::exp(-sigma[i]));
    log_t -= sigma[i];
    transmittance[i] = std::exp(log_t);
  }
}

void weights_backward(const std::vector<double>& sigma, const std::vector<double>& omega,
                      const std::vector<double>& transmittance,
                      const std::vector<double>& d_omega, std::vector<double>& d_sigma) {
  (void)sigma;
  const std::size_t n = omega.size();
  d_sigma.assign(n, 0.0);
  // d omega_n / d sigma_n = T_n; d omega_n / d sigma_k = -omega_n for k < n.
  double suffix = 0.0;  // sum_{m > k} d_omega_m * omega_m
  for (std::size_t k = n; k-- > 0;) {
    d_sigma[k] = d_omega[k] * transmittance[k] - suffix;
    suffix += d_omega[k] * omega[k];
  }
}

RenderResult render_ray(const RaySamples& samples, const std::vector<double>& s,
                        const std::vector<Vec3>& colors, double beta) {
  RenderResult out;
  const std::size_t n = samples.size();
  out.s = s;
  out.sigma.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.sigma[i] = sdf_to_density(s[i], beta);
  std::vector<double> transmittance;
  compute_weights(out.sigma, out.omega, transmittance);
  for (std::size_t i = 0; i < n; ++i) {
    out.c_hat += out.omega[i] * colors[i];
    out.d_hat += out.omega[i] * samples.depths[i];
  }
  return out;
}

}  // namespace trislam
