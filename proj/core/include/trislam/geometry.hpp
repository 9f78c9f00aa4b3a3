#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <optional>

namespace trislam {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Vec7 = Eigen::Matrix<double, 7, 1>;

/// Rigid camera-to-world transform, unit quaternion (w,x,y,z) + translation.
struct Pose {
  Eigen::Quaterniond q{1.0, 0.0, 0.0, 0.0};
  Vec3 t{0.0, 0.0, 0.0};

  Pose() = default;
  Pose(const Eigen::Quaterniond& q_in, const Vec3& t_in) : q(q_in.normalized()), t(t_in) {}

  Vec3 apply(const Vec3& p) const { return q * p + t; }
  Mat3 rotation() const { return q.toRotationMatrix(); }

  static Pose identity() { return Pose{}; }
};

// vec7 layout: (qw, qx, qy, qz, tx, ty, tz). from_vec7 renormalizes the
// quaternion; a near-zero quaternion norm is a hard error.
Vec7 to_vec7(const Pose& pose);
Pose from_vec7(const Vec7& v);

Pose pose_compose(const Pose& a, const Pose& b);
Pose pose_inverse(const Pose& a);

// Constant speed model: prev * inverse(prev2) * prev.
Pose constant_speed_predict(const Pose& prev, const Pose& prev2);

// Angular difference between two poses, radians.
double rotation_angle_between(const Pose& a, const Pose& b);

struct CameraIntrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;
  double depth_scale = 5000.0;  // integer units per meter in depth images

  void validate() const;  // throws on fx/fy <= 0 or principal point out of image
};

/// World-space ray through one pixel. `dir` is unit length; `z_to_arc`
/// converts camera z-depth to arclength along `dir`, so the point at
/// z-depth d is origin + d * z_to_arc * dir.
struct Ray {
  Vec3 origin{0, 0, 0};
  Vec3 dir{0, 0, 1};
  double z_to_arc = 1.0;
  double u = 0, v = 0;
  Vec3 gt_color{0, 0, 0};
  double gt_depth = 0;  // meters; 0 = invalid

  Vec3 point_at_depth(double z) const { return origin + (z * z_to_arc) * dir; }
};

// Back-projects pixel (u,v). Throws if the pixel is out of bounds.
Ray pixel_to_ray(const CameraIntrinsics& intr, const Pose& pose, double u, double v,
                 double gt_depth = 0.0, const Vec3& gt_color = Vec3::Zero());

// Camera-frame unnormalized direction ((u-cx)/fx, (v-cy)/fy, 1).
Vec3 pixel_camera_dir(const CameraIntrinsics& intr, double u, double v);

// Projects a world point into the image. Returns nullopt when the point is
// behind the camera (z <= 0); callers check pixel bounds themselves.
struct PixelProjection {
  double u, v;
  double z;  // camera-frame depth
};
std::optional<PixelProjection> project_point(const CameraIntrinsics& intr, const Pose& pose,
                                             const Vec3& world_point);

// World point of pixel (u,v) at camera z-depth z.
Vec3 back_project(const CameraIntrinsics& intr, const Pose& pose, double u, double v, double z);

}  // namespace trislam
