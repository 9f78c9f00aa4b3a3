#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "trislam/image.hpp"
#include "trislam/render_loss.hpp"

namespace trislam {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Vec3> colors;  // optional per-vertex colors in [0,1]

  bool empty() const { return triangles.empty(); }
};

using ScalarField = std::function<double(const Vec3&)>;

// Marching cubes at iso level 0 with edge interpolation. Cell polygons are
// traced through per-face marching-squares segments (ambiguous faces solved
// by the bilinear asymptotic decider), so adjacent cells always agree and
// closed surfaces come out watertight. Vertices are shared via global edge
// keys; degenerate triangles are dropped.
TriangleMesh marching_cubes(const ScalarField& field, const Aabb& bounds, double voxel);

// Field-backed extraction over the union of submap bounds (points outside
// every submap read as +1). Throws when the manager is empty. Vertex colors
// come from the color decoder.
TriangleMesh extract_mesh(const ParamStore& store, const SceneField& field, double voxel);

// Keeps a face iff some frame sees its centroid in-bounds with positive
// camera depth at most `2 * trunc` behind the observed depth at that pixel.
TriangleMesh cull_mesh(const TriangleMesh& mesh, const std::vector<Pose>& poses,
                       const CameraIntrinsics& intr, const std::vector<DepthImage>& depths,
                       double trunc);

// ASCII PLY with per-vertex uchar colors.
void write_ply(const std::string& path, const TriangleMesh& mesh);

}  // namespace trislam
