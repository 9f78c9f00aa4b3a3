#include "trislam/evaluation.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace trislam {

double ate_rmse_cm(const Trajectory& estimated, const Trajectory& groundtruth) {
  if (estimated.size() != groundtruth.size())
    throw std::runtime_error("ate_rmse: trajectory length mismatch");
  if (estimated.empty()) throw std::runtime_error("ate_rmse: empty trajectories");
  const std::size_t n = estimated.size();

  Vec3 mean_e = Vec3::Zero(), mean_g = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mean_e += estimated[i].pose.t;
    mean_g += groundtruth[i].pose.t;
  }
  mean_e /= static_cast<double>(n);
  mean_g /= static_cast<double>(n);

  Mat3 cross = Mat3::Zero();
  for (std::size_t i = 0; i < n; ++i)
    cross += (estimated[i].pose.t - mean_e) * (groundtruth[i].pose.t - mean_g).transpose();

  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 flip = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0) flip(2, 2) = -1.0;
  const Mat3 rot = svd.matrixV() * flip * svd.matrixU().transpose();
  const Vec3 trans = mean_g - rot * mean_e;

  double sum_sq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 resid = groundtruth[i].pose.t - (rot * estimated[i].pose.t + trans);
    sum_sq += resid.squaredNorm();
  }
  return 100.0 * std::sqrt(sum_sq / static_cast<double>(n));
}

double depth_l1_cm(const DepthRenderFn& render, const std::vector<Pose>& poses,
                   const std::vector<DepthImage>& gt_depths, const CameraIntrinsics& intr,
                   int stride) {
  if (poses.size() != gt_depths.size())
    throw std::runtime_error("depth_l1: pose/depth count mismatch");
  if (stride < 1) stride = 1;
  double acc = 0;
  std::int64_t count = 0;
  for (std::size_t f = 0; f < poses.size(); f += static_cast<std::size_t>(stride)) {
    const DepthImage& gt = gt_depths[f];
    for (int v = 0; v < gt.height; v += stride) {
      for (int u = 0; u < gt.width; u += stride) {
        const double d = gt.at(u, v);
        if (d <= 0) continue;
        acc += std::abs(render(poses[f], u, v, d) - d);
        ++count;
      }
    }
  }
  if (count == 0) throw std::runtime_error("depth_l1: no valid pixels");
  return 100.0 * acc / static_cast<double>(count);
}

double depth_l1_cm_for_field(ParamStore& store, const SceneField& field,
                             const std::vector<Pose>& poses,
                             const std::vector<DepthImage>& gt_depths,
                             const CameraIntrinsics& intr, int stride, const RenderConfig& rcfg,
                             Rng& rng) {
  DepthRenderFn fn = [&](const Pose& pose, double u, double v, double gt_depth) {
    return render_depth_for_pixel(store, field, pose, intr, u, v, gt_depth, rcfg, rng);
  };
  return depth_l1_cm(fn, poses, gt_depths, intr, stride);
}

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Ericson, Real-Time Collision Detection, closest point on triangle.
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return (p - a).norm();
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return (p - b).norm();
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    const double t = d1 / (d1 - d3);
    return (p - (a + t * ab)).norm();
  }
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return (p - c).norm();
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    const double t = d2 / (d2 - d6);
    return (p - (a + t * ac)).norm();
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    const double t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return (p - (b + t * (c - b))).norm();
  }
  const double denom = 1.0 / (va + vb + vc);
  const double s = vb * denom, t = vc * denom;
  return (p - (a + s * ab + t * ac)).norm();
}

namespace {

// Uniform area-weighted surface samples of a mesh.
std::vector<Vec3> sample_mesh_surface(const TriangleMesh& mesh, int n, Rng& rng) {
  std::vector<double> cum_area;
  cum_area.reserve(mesh.triangles.size());
  double total = 0;
  for (const auto& tri : mesh.triangles) {
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(tri[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(tri[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(tri[2])];
    total += 0.5 * ((b - a).cross(c - a)).norm();
    cum_area.push_back(total);
  }
  if (total <= 0) throw std::runtime_error("chamfer: mesh has no area");
  std::vector<Vec3> points;
  points.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double pick = rng.uniform() * total;
    const std::size_t t = static_cast<std::size_t>(
        std::lower_bound(cum_area.begin(), cum_area.end(), pick) - cum_area.begin());
    const auto& tri = mesh.triangles[std::min(t, mesh.triangles.size() - 1)];
    double r1 = rng.uniform(), r2 = rng.uniform();
    if (r1 + r2 > 1) {
      r1 = 1 - r1;
      r2 = 1 - r2;
    }
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(tri[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(tri[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(tri[2])];
    points.push_back(a + r1 * (b - a) + r2 * (c - a));
  }
  return points;
}

double primitive_area(const Primitive& prim) {
  if (prim.shape == Primitive::Shape::Sphere)
    return 4.0 * 3.14159265358979323846 * prim.radius * prim.radius;
  const Vec3 s = 2.0 * prim.half_extent;
  return 2.0 * (s.x() * s.y() + s.y() * s.z() + s.z() * s.x());
}

Vec3 sample_primitive_surface(const Primitive& prim, Rng& rng) {
  if (prim.shape == Primitive::Shape::Sphere) {
    Vec3 dir(rng.normal(), rng.normal(), rng.normal());
    const double n = dir.norm();
    if (n < 1e-12) return prim.center + Vec3(prim.radius, 0, 0);
    return prim.center + prim.radius * dir / n;
  }
  const Vec3 s = 2.0 * prim.half_extent;
  const double axy = s.x() * s.y(), ayz = s.y() * s.z(), azx = s.z() * s.x();
  const double pick = rng.uniform() * 2.0 * (axy + ayz + azx);
  int axis;  // face normal axis
  if (pick < 2 * axy)
    axis = 2;
  else if (pick < 2 * axy + 2 * ayz)
    axis = 0;
  else
    axis = 1;
  const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
  Vec3 local;
  local[axis] = side * prim.half_extent[axis];
  const int u_axis = (axis + 1) % 3, v_axis = (axis + 2) % 3;
  local[u_axis] = (2.0 * rng.uniform() - 1.0) * prim.half_extent[u_axis];
  local[v_axis] = (2.0 * rng.uniform() - 1.0) * prim.half_extent[v_axis];
  return prim.center + local;
}

/// Hash-grid over triangles for nearest-distance queries.
class TriangleGrid {
 public:
  TriangleGrid(const TriangleMesh& mesh, double cell) : mesh_(mesh), cell_(cell) {
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
      const auto& tri = mesh.triangles[t];
      Vec3 lo = mesh.vertices[static_cast<std::size_t>(tri[0])];
      Vec3 hi = lo;
      for (int c = 1; c < 3; ++c) {
        lo = lo.cwiseMin(mesh.vertices[static_cast<std::size_t>(tri[c])]);
        hi = hi.cwiseMax(mesh.vertices[static_cast<std::size_t>(tri[c])]);
      }
      const auto lo_c = cell_of(lo);
      const auto hi_c = cell_of(hi);
      for (int x = lo_c[0]; x <= hi_c[0]; ++x)
        for (int y = lo_c[1]; y <= hi_c[1]; ++y)
          for (int z = lo_c[2]; z <= hi_c[2]; ++z)
            cells_[key(x, y, z)].push_back(static_cast<int>(t));
    }
  }

  double nearest_distance(const Vec3& p) const {
    const auto c = cell_of(p);
    double best = std::numeric_limits<double>::infinity();
    constexpr int kMaxRing = 4000;
    for (int ring = 0; ring <= kMaxRing; ++ring) {
      // Every unscanned cell lies at Chebyshev ring+1, hence at geometric
      // distance >= ring * cell from p; stop once best is within that.
      if (best <= ring * cell_) break;
      for (int x = c[0] - ring; x <= c[0] + ring; ++x) {
        for (int y = c[1] - ring; y <= c[1] + ring; ++y) {
          for (int z = c[2] - ring; z <= c[2] + ring; ++z) {
            if (std::max({std::abs(x - c[0]), std::abs(y - c[1]), std::abs(z - c[2])}) != ring)
              continue;  // shell only
            auto it = cells_.find(key(x, y, z));
            if (it == cells_.end()) continue;
            for (int t : it->second) {
              const auto& tri = mesh_.triangles[static_cast<std::size_t>(t)];
              best = std::min(best, point_triangle_distance(
                                        p, mesh_.vertices[static_cast<std::size_t>(tri[0])],
                                        mesh_.vertices[static_cast<std::size_t>(tri[1])],
                                        mesh_.vertices[static_cast<std::size_t>(tri[2])]));
            }
          }
        }
      }
    }
    return best;
  }

 private:
  std::array<int, 3> cell_of(const Vec3& p) const {
    return {static_cast<int>(std::floor(p.x() / cell_)),
            static_cast<int>(std::floor(p.y() / cell_)),
            static_cast<int>(std::floor(p.z() / cell_))};
  }
  static std::int64_t key(int x, int y, int z) {
    return (static_cast<std::int64_t>(x) * 73856093) ^ (static_cast<std::int64_t>(y) * 19349663) ^
           (static_cast<std::int64_t>(z) * 83492791);
  }
  const TriangleMesh& mesh_;
  double cell_;
  std::unordered_map<std::int64_t, std::vector<int>> cells_;
};

}  // namespace

ChamferResult chamfer_vs_scene(const TriangleMesh& mesh, const AnalyticScene& scene,
                               int samples_each_way, Rng& rng) {
  if (mesh.empty()) throw std::runtime_error("chamfer: empty mesh");
  ChamferResult result;

  // Accuracy: mesh -> scene surface via the exact SDF.
  const auto mesh_points = sample_mesh_surface(mesh, samples_each_way, rng);
  double acc = 0;
  for (const Vec3& p : mesh_points) acc += std::abs(scene_sdf(scene, p));
  result.accuracy_cm = 100.0 * acc / static_cast<double>(mesh_points.size());

  // Completion: scene surface -> mesh. Surface points swallowed by another
  // primitive (union interior) are rejected.
  std::vector<double> cum_area;
  double total_area = 0;
  for (const auto& prim : scene.primitives) {
    total_area += primitive_area(prim);
    cum_area.push_back(total_area);
  }
  TriangleGrid grid(mesh, 0.1);
  double comp = 0;
  int accepted = 0;
  int attempts = 0;
  const int max_attempts = samples_each_way * 50;
  while (accepted < samples_each_way && attempts < max_attempts) {
    ++attempts;
    const double pick = rng.uniform() * total_area;
    const std::size_t idx = static_cast<std::size_t>(
        std::lower_bound(cum_area.begin(), cum_area.end(), pick) - cum_area.begin());
    const Primitive& prim = scene.primitives[std::min(idx, scene.primitives.size() - 1)];
    if (prim.op == Primitive::Op::Subtraction) continue;
    const Vec3 p = sample_primitive_surface(prim, rng);
    if (std::abs(scene_sdf(scene, p)) > 1e-6) continue;  // inside the union
    comp += grid.nearest_distance(p);
    ++accepted;
  }
  if (accepted == 0) throw std::runtime_error("chamfer: no scene surface samples accepted");
  result.completion_cm = 100.0 * comp / static_cast<double>(accepted);
  return result;
}

}  // namespace trislam
