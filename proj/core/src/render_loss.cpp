#include "trislam/render_loss.hpp"

#include <cmath>
#include <stdexcept>

namespace trislam {

namespace {

// d(R(q) k)/dq for a unit quaternion q = (w,x,y,z): returns M_j * k for the
// four components.
void rotation_jacobian_times(const Eigen::Quaterniond& q, const Vec3& k, Vec3 out[4]) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  const double kx = k.x(), ky = k.y(), kz = k.z();
  out[0] = 2.0 * Vec3(-z * ky + y * kz, z * kx - x * kz, -y * kx + x * ky);            // d/dw
  out[1] = 2.0 * Vec3(y * ky + z * kz, y * kx - 2 * x * ky - w * kz, z * kx + w * ky - 2 * x * kz);  // d/dx
  out[2] = 2.0 * Vec3(-2 * y * kx + x * ky + w * kz, x * kx + z * kz, -w * kx + z * ky - 2 * y * kz); // d/dy
  out[3] = 2.0 * Vec3(-2 * z * kx - w * ky + x * kz, w * kx - 2 * z * ky + y * kz, x * kx + y * ky);  // d/dz
}

struct SlotState {
  Eigen::Quaterniond q_hat;
  Vec3 t;
  Mat3 rot;
  double q_norm = 1.0;
};

SlotState slot_state(const PoseSlot& slot) {
  const auto& v = slot.block->values;
  const double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3]);
  if (!(norm > 1e-12)) throw std::runtime_error("degenerate rotation in pose block");
  SlotState st;
  st.q_hat = Eigen::Quaterniond(v[0] / norm, v[1] / norm, v[2] / norm, v[3] / norm);
  st.t = Vec3(v[4], v[5], v[6]);
  st.rot = st.q_hat.toRotationMatrix();
  st.q_norm = norm;
  return st;
}

/// Per-ray buffers, reused across rays of a batch.
struct RayWorkspace {
  std::vector<double> s, sigma, omega, transmittance, d_omega, d_sigma, d_s_direct;
  std::vector<Vec3> colors, points;
  std::vector<int> submap_of;
  std::vector<double> f_s, f_c;        // N x feat_len
  std::vector<Decoders::Workspace> dec_ws;
  std::vector<SubmapQueryScratch> enc_ws;
  std::vector<double> d_fs, d_fc;      // feat_len scratch
};

}  // namespace

BlockId add_beta_block(ParamStore& store, double beta_init, double learning_rate) {
  if (!(beta_init > 0)) throw std::runtime_error("beta must be initialized positive");
  const BlockId id = store.add_block("beta", 1, learning_rate);
  store.block(id).values[0] = std::log(beta_init);
  return id;
}

double beta_value(const ParamStore& store, BlockId beta_block) {
  return std::exp(store.block(beta_block).values[0]);
}

FieldSample query_field(const ParamStore& store, const SceneField& field, const Vec3& p) {
  FieldSample out;
  const int sm_idx = field.manager->locate(p);
  if (sm_idx < 0) return out;
  const SubMap& sm = field.manager->submap(static_cast<std::size_t>(sm_idx));
  const int feat_len = sm.feature_length();
  thread_local SubmapQueryScratch scratch;
  thread_local std::vector<double> f_s, f_c;
  thread_local Decoders::Workspace ws;
  f_s.resize(static_cast<std::size_t>(feat_len));
  f_c.resize(static_cast<std::size_t>(feat_len));
  sm.encode_features(store, p, f_s.data(), f_c.data(), scratch);
  field.decoders->decode(store, f_s.data(), f_c.data(), &out.s, &out.color, ws);
  out.inside = true;
  return out;
}

PreparedRay prepare_ray(const CameraIntrinsics& intr, int pose_slot, double u, double v,
                        const Vec3& gt_color, double gt_depth, const RenderConfig& rcfg,
                        Rng& rng) {
  if (u < 0 || u >= intr.width || v < 0 || v >= intr.height)
    throw std::runtime_error("prepare_ray: pixel out of bounds");
  PreparedRay ray;
  ray.pose_slot = pose_slot;
  ray.cam_dir = pixel_camera_dir(intr, u, v);
  ray.gt_color = gt_color;
  ray.gt_depth = gt_depth;
  ray.samples = sample_ray_depths(gt_depth, rcfg.near, rcfg.far_for(gt_depth), rcfg.n_regular,
                                  rcfg.n_surface, rcfg.trunc, rng);
  ray.classes = classify_samples(ray.samples.depths, gt_depth, rcfg.trunc);
  return ray;
}

BatchStats evaluate_batch(ParamStore& store, const SceneField& field,
                          std::vector<PoseSlot>& poses, const std::vector<PreparedRay>& rays,
                          const RenderConfig& rcfg, const LossWeights& weights,
                          const BatchOptions& opts) {
  BatchStats stats;
  stats.rays_total = static_cast<int>(rays.size());
  stats.submap_touched.assign(field.manager->size(), 0);
  const SubMapManager& manager = *field.manager;
  const Decoders& decoders = *field.decoders;
  const double beta = beta_value(store, field.beta_block);

  std::vector<SlotState> slots(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) slots[i] = slot_state(poses[i]);

  // Ray filtering on far-bound containment.
  std::vector<char> keep(rays.size(), 0);
  int kept = 0;
  for (std::size_t r = 0; r < rays.size(); ++r) {
    const auto& ray = rays[r];
    const SlotState& st = slots[static_cast<std::size_t>(ray.pose_slot)];
    const Vec3 far_point = st.t + rcfg.far_for(ray.gt_depth) * (st.rot * ray.cam_dir);
    if (manager.locate(far_point) >= 0) {
      keep[r] = 1;
      ++kept;
    }
  }
  stats.rays_kept = kept;
  if (kept == 0) return stats;
  const double inv_r = 1.0 / static_cast<double>(kept);

  const int feat_len =
      manager.size() > 0 ? manager.submap(0).feature_length() : 0;

  RayWorkspace ws;
  ws.d_fs.resize(static_cast<std::size_t>(feat_len));
  ws.d_fc.resize(static_cast<std::size_t>(feat_len));

  double beta_grad = 0.0;  // dL/d(beta), mapped to log-beta at the end

  for (std::size_t r = 0; r < rays.size(); ++r) {
    if (!keep[r]) continue;
    const auto& ray = rays[r];
    const std::size_t n = ray.samples.size();
    PoseSlot& slot = poses[static_cast<std::size_t>(ray.pose_slot)];
    const SlotState& st = slots[static_cast<std::size_t>(ray.pose_slot)];
    const Vec3 origin = st.t;
    const Vec3 w_dir = st.rot * ray.cam_dir;

    // Forward: field values per sample.
    ws.s.resize(n);
    ws.sigma.resize(n);
    ws.colors.resize(n);
    ws.points.resize(n);
    ws.submap_of.resize(n);
    ws.f_s.resize(n * static_cast<std::size_t>(feat_len));
    ws.f_c.resize(n * static_cast<std::size_t>(feat_len));
    if (ws.dec_ws.size() < n) ws.dec_ws.resize(n);
    if (ws.enc_ws.size() < n) ws.enc_ws.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 p = origin + ray.samples.depths[i] * w_dir;
      ws.points[i] = p;
      const int sm_idx = manager.locate(p);
      ws.submap_of[i] = sm_idx;
      if (sm_idx >= 0) stats.submap_touched[static_cast<std::size_t>(sm_idx)] = 1;
      if (sm_idx < 0) {
        ws.s[i] = 1.0;  // free space, no gradient
        ws.colors[i] = Vec3::Zero();
        continue;
      }
      const SubMap& sm = manager.submap(static_cast<std::size_t>(sm_idx));
      double* f_s = &ws.f_s[i * static_cast<std::size_t>(feat_len)];
      double* f_c = &ws.f_c[i * static_cast<std::size_t>(feat_len)];
      sm.encode_features(store, p, f_s, f_c, ws.enc_ws[i]);
      decoders.decode(store, f_s, f_c, &ws.s[i], &ws.colors[i], ws.dec_ws[i]);
    }
    for (std::size_t i = 0; i < n; ++i) ws.sigma[i] = sdf_to_density(ws.s[i], beta);
    compute_weights(ws.sigma, ws.omega, ws.transmittance);

    Vec3 c_hat = Vec3::Zero();
    double d_hat = 0;
    for (std::size_t i = 0; i < n; ++i) {
      c_hat += ws.omega[i] * ws.colors[i];
      d_hat += ws.omega[i] * ray.samples.depths[i];
    }

    // Loss values.
    stats.losses.rgb += (c_hat - ray.gt_color).squaredNorm() / 3.0;
    const double depth_err = d_hat - ray.gt_depth;
    stats.losses.depth += depth_err * depth_err;
    const RaySdfLosses ray_sdf =
        sdf_losses(ws.s, ray.classes, ray.samples.depths, ray.gt_depth, rcfg.trunc, weights);
    stats.losses.fs += ray_sdf.fs;
    stats.losses.mid += ray_sdf.mid;
    stats.losses.tail += ray_sdf.tail;

    if (!opts.scene_grads && !opts.pose_grads) continue;

    // Backward. Upstream gradients of the weighted total w.r.t. this ray.
    const Vec3 d_chat = weights.rgb * (2.0 / 3.0) * inv_r * (c_hat - ray.gt_color);
    const double d_dhat = weights.depth * 2.0 * inv_r * depth_err;

    ws.d_omega.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      ws.d_omega[i] = d_chat.dot(ws.colors[i]) + d_dhat * ray.samples.depths[i];
    weights_backward(ws.sigma, ws.omega, ws.transmittance, ws.d_omega, ws.d_sigma);

    // Direct TSDF-loss gradients on s.
    auto& d_s_direct = ws.d_s_direct;
    d_s_direct.assign(n, 0.0);
    auto residual = [&](std::size_t i) {
      if (weights.paper_literal_tsdf)
        return ws.s[i] + ray.gt_depth - ray.samples.depths[i];
      return ws.s[i] - (ray.gt_depth - ray.samples.depths[i]) / rcfg.trunc;
    };
    if (!ray.classes.fs.empty()) {
      const double scale = weights.fs * inv_r * 2.0 / static_cast<double>(ray.classes.fs.size());
      for (int i : ray.classes.fs) d_s_direct[static_cast<std::size_t>(i)] += scale * (ws.s[static_cast<std::size_t>(i)] - 1.0);
    }
    if (!ray.classes.mid.empty()) {
      const double scale = weights.mid * inv_r * 2.0 / static_cast<double>(ray.classes.mid.size());
      for (int i : ray.classes.mid) d_s_direct[static_cast<std::size_t>(i)] += scale * residual(static_cast<std::size_t>(i));
    }
    if (!ray.classes.tail.empty()) {
      const double scale = weights.tail * inv_r * 2.0 / static_cast<double>(ray.classes.tail.size());
      for (int i : ray.classes.tail) d_s_direct[static_cast<std::size_t>(i)] += scale * residual(static_cast<std::size_t>(i));
    }

    const bool want_pose = opts.pose_grads && !slot.frozen;
    Vec3 d_origin = Vec3::Zero();
    Vec3 d_wdir = Vec3::Zero();

    for (std::size_t i = 0; i < n; ++i) {
      double d_sig_ds, d_sig_dbeta;
      sdf_to_density_grad(ws.s[i], beta, &d_sig_ds, &d_sig_dbeta);
      if (opts.scene_grads) beta_grad += ws.d_sigma[i] * d_sig_dbeta;
      const double d_s = ws.d_sigma[i] * d_sig_ds + d_s_direct[i];
      if (ws.submap_of[i] < 0) continue;  // imputed free space: not differentiated
      const Vec3 d_c = ws.omega[i] * d_chat;
      const SubMap& sm = manager.submap(static_cast<std::size_t>(ws.submap_of[i]));
      const double* f_s = &ws.f_s[i * static_cast<std::size_t>(feat_len)];
      const double* f_c = &ws.f_c[i * static_cast<std::size_t>(feat_len)];
      std::fill(ws.d_fs.begin(), ws.d_fs.end(), 0.0);
      std::fill(ws.d_fc.begin(), ws.d_fc.end(), 0.0);
      decoders.decode_backward(store, f_s, f_c, ws.colors[i], ws.dec_ws[i], d_s, d_c,
                               ws.d_fs.data(), ws.d_fc.data(), opts.scene_grads);
      Vec3 d_p = Vec3::Zero();
      sm.encode_backward(store, ws.enc_ws[i], ws.d_fs.data(), ws.d_fc.data(),
                         want_pose ? &d_p : nullptr, opts.scene_grads);
      if (want_pose) {
        d_origin += d_p;
        d_wdir += ray.samples.depths[i] * d_p;
      }
    }

    if (want_pose) {
      Vec3 jac[4];
      rotation_jacobian_times(st.q_hat, ray.cam_dir, jac);
      Vec4 d_qhat;
      for (int j = 0; j < 4; ++j) d_qhat[j] = d_wdir.dot(jac[j]);
      // Through the normalization q_hat = q / |q|.
      const Vec4 q_hat_v(st.q_hat.w(), st.q_hat.x(), st.q_hat.y(), st.q_hat.z());
      const Vec4 d_q = (d_qhat - q_hat_v * q_hat_v.dot(d_qhat)) / st.q_norm;
      auto& g = slot.block->grads;
      for (int j = 0; j < 4; ++j) g[static_cast<std::size_t>(j)] += d_q[j];
      for (int j = 0; j < 3; ++j) g[static_cast<std::size_t>(4 + j)] += d_origin[j];
    }
  }

  if (opts.scene_grads) {
    // log-beta parameterization
    store.block(field.beta_block).grads[0] += beta_grad * beta;
  }

  stats.losses.rgb *= inv_r;
  stats.losses.depth *= inv_r;
  stats.losses.fs *= inv_r;
  stats.losses.mid *= inv_r;
  stats.losses.tail *= inv_r;
  stats.total = total_loss(stats.losses, weights);
  return stats;
}

double render_depth_for_pixel(ParamStore& store, const SceneField& field, const Pose& pose,
                              const CameraIntrinsics& intr, double u, double v, double gt_depth,
                              const RenderConfig& rcfg, Rng& rng) {
  const Vec3 cam_dir = pixel_camera_dir(intr, u, v);
  const Vec3 w_dir = pose.q * cam_dir;
  RaySamples samples = sample_ray_depths(gt_depth, rcfg.near, rcfg.far_for(gt_depth),
                                         rcfg.n_regular, rcfg.n_surface, rcfg.trunc, rng);
  const std::size_t n = samples.size();
  std::vector<double> s(n);
  std::vector<Vec3> colors(n);
  for (std::size_t i = 0; i < n; ++i) {
    const FieldSample fs = query_field(store, field, pose.t + samples.depths[i] * w_dir);
    s[i] = fs.s;
    colors[i] = fs.color;
  }
  const RenderResult res = render_ray(samples, s, colors, beta_value(store, field.beta_block));
  return res.d_hat;
}

}  // namespace trislam
