#include "trislam/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace trislam {

Vec7 to_vec7(const Pose& pose) {
  Vec7 v;
  v << pose.q.w(), pose.q.x(), pose.q.y(), pose.q.z(), pose.t.x(), pose.t.y(), pose.t.z();
  return v;
}

Pose from_vec7(const Vec7& v) {
  const double norm2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3];
  if (!(norm2 > 1e-24)) throw std::runtime_error("degenerate rotation: quaternion norm ~ 0");
  Pose pose;
  // Skip the division for already-unit quaternions so renormalization is
  // exactly idempotent.
  if (std::abs(norm2 - 1.0) > 1e-13) {
    const double inv = 1.0 / std::sqrt(norm2);
    pose.q = Eigen::Quaterniond(v[0] * inv, v[1] * inv, v[2] * inv, v[3] * inv);
  } else {
    pose.q = Eigen::Quaterniond(v[0], v[1], v[2], v[3]);
  }
  pose.t = Vec3(v[4], v[5], v[6]);
  return pose;
}

Pose pose_compose(const Pose& a, const Pose& b) {
  Pose out;
  out.q = (a.q * b.q).normalized();
  out.t = a.q * b.t + a.t;
  return out;
}

Pose pose_inverse(const Pose& a) {
  Pose out;
  out.q = a.q.conjugate();
  out.t = -(out.q * a.t);
  return out;
}

Pose constant_speed_predict(const Pose& prev, const Pose& prev2) {
  return pose_compose(pose_compose(prev, pose_inverse(prev2)), prev);
}

double rotation_angle_between(const Pose& a, const Pose& b) {
  const double d = std::min(1.0, std::abs(a.q.dot(b.q)));
  return 2.0 * std::acos(d);
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw std::runtime_error("intrinsics: fx, fy must be positive");
  if (cx < 0 || cx >= width || cy < 0 || cy >= height)
    throw std::runtime_error("intrinsics: principal point outside image");
  if (width <= 0 || height <= 0) throw std::runtime_error("intrinsics: empty image size");
}

Vec3 pixel_camera_dir(const CameraIntrinsics& intr, double u, double v) {
  return Vec3((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
}

Ray pixel_to_ray(const CameraIntrinsics& intr, const Pose& pose, double u, double v,
                 double gt_depth, const Vec3& gt_color) {
  if (u < 0 || u >= intr.width || v < 0 || v >= intr.height)
    throw std::runtime_error("pixel_to_ray: pixel (" + std::to_string(u) + "," +
                             std::to_string(v) + ") out of bounds");
  const Vec3 cam_dir = pixel_camera_dir(intr, u, v);
  const Vec3 world_dir = pose.q * cam_dir;
  Ray ray;
  ray.origin = pose.t;
  ray.z_to_arc = world_dir.norm();
  ray.dir = world_dir / ray.z_to_arc;
  ray.u = u;
  ray.v = v;
  ray.gt_color = gt_color;
  ray.gt_depth = gt_depth;
  return ray;
}

std::optional<PixelProjection> project_point(const CameraIntrinsics& intr, const Pose& pose,
                                             const Vec3& world_point) {
  const Vec3 cam = pose.q.conjugate() * (world_point - pose.t);
  if (cam.z() <= 0) return std::nullopt;
  PixelProjection proj;
  proj.u = intr.fx * cam.x() / cam.z() + intr.cx;
  proj.v = intr.fy * cam.y() / cam.z() + intr.cy;
  proj.z = cam.z();
  return proj;
}

Vec3 back_project(const CameraIntrinsics& intr, const Pose& pose, double u, double v, double z) {
  return pose.apply(z * pixel_camera_dir(intr, u, v));
}

}  // namespace trislam
