#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "trislam/mesh.hpp"
#include "trislam/synthetic.hpp"

using namespace trislam;

namespace {
ScalarField sphere_field(const Vec3& center, double radius) {
  return [=](const Vec3& p) { return (p - center).norm() - radius; };
}

Aabb cube_bounds(double half) {
  Aabb b;
  b.min = Vec3(-half, -half, -half);
  b.max = Vec3(half, half, half);
  return b;
}

double mean_abs_sphere_distance(const TriangleMesh& mesh, const Vec3& center, double radius) {
  double acc = 0;
  for (const Vec3& v : mesh.vertices) acc += std::abs((v - center).norm() - radius);
  return acc / static_cast<double>(mesh.vertices.size());
}
}  // namespace

TEST_CASE("marching cubes on an analytic sphere") {
  const Vec3 center(0.03, -0.02, 0.05);
  const double radius = 0.6;
  const double voxel = 0.05;
  const TriangleMesh mesh = marching_cubes(sphere_field(center, radius), cube_bounds(1.0), voxel);
  REQUIRE(!mesh.empty());

  SUBCASE("vertices lie within one voxel of the surface") {
    for (const Vec3& v : mesh.vertices)
      CHECK(std::abs((v - center).norm() - radius) <= voxel);
  }
  SUBCASE("closed surface is watertight: every edge borders exactly 2 faces") {
    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& tri : mesh.triangles) {
      for (int e = 0; e < 3; ++e) {
        int a = tri[static_cast<std::size_t>(e)];
        int b = tri[static_cast<std::size_t>((e + 1) % 3)];
        if (a > b) std::swap(a, b);
        edge_count[{a, b}] += 1;
      }
    }
    for (const auto& [edge, count] : edge_count) CHECK(count == 2);
  }
  SUBCASE("halving the voxel does not increase the surface distance") {
    const TriangleMesh fine =
        marching_cubes(sphere_field(center, radius), cube_bounds(1.0), voxel / 2);
    CHECK(mean_abs_sphere_distance(fine, center, radius) <=
          mean_abs_sphere_distance(mesh, center, radius) + 1e-12);
  }
  SUBCASE("triangles wind outward (normals align with the gradient)") {
    int outward = 0, inward = 0;
    for (const auto& tri : mesh.triangles) {
      const Vec3& a = mesh.vertices[static_cast<std::size_t>(tri[0])];
      const Vec3& b = mesh.vertices[static_cast<std::size_t>(tri[1])];
      const Vec3& c = mesh.vertices[static_cast<std::size_t>(tri[2])];
      const Vec3 n = (b - a).cross(c - a);
      const Vec3 radial = ((a + b + c) / 3.0 - center);
      (n.dot(radial) > 0 ? outward : inward) += 1;
    }
    CHECK(inward == 0);
    CHECK(outward > 0);
  }
}

TEST_CASE("marching cubes on uniform free space is empty") {
  const TriangleMesh mesh =
      marching_cubes([](const Vec3&) { return 1.0; }, cube_bounds(1.0), 0.1);
  CHECK(mesh.empty());
}

TEST_CASE("cull_mesh") {
  CameraIntrinsics intr;
  intr.width = 64;
  intr.height = 48;
  intr.fx = intr.fy = 32;
  intr.cx = 32;
  intr.cy = 24;

  // One camera at the origin looking +z at a wall of depth 2.
  std::vector<Pose> poses{Pose::identity()};
  std::vector<DepthImage> depths;
  DepthImage depth(intr.width, intr.height);
  for (double& d : depth.depths) d = 2.0;
  depths.push_back(depth);
  const double trunc = 0.06;

  TriangleMesh mesh;
  // Face A: observed wall patch at z=2.
  mesh.vertices.push_back(Vec3(-0.1, -0.1, 2.0));
  mesh.vertices.push_back(Vec3(0.1, -0.1, 2.0));
  mesh.vertices.push_back(Vec3(0, 0.1, 2.0));
  mesh.triangles.push_back({0, 1, 2});
  // Face B: behind the camera.
  mesh.vertices.push_back(Vec3(-0.1, -0.1, -1.0));
  mesh.vertices.push_back(Vec3(0.1, -0.1, -1.0));
  mesh.vertices.push_back(Vec3(0, 0.1, -1.0));
  mesh.triangles.push_back({3, 4, 5});
  // Face C: 1 m behind the observed wall (occluded everywhere).
  mesh.vertices.push_back(Vec3(-0.1, -0.1, 3.0));
  mesh.vertices.push_back(Vec3(0.1, -0.1, 3.0));
  mesh.vertices.push_back(Vec3(0, 0.1, 3.0));
  mesh.triangles.push_back({6, 7, 8});
  // Face D: slightly behind the wall but within the 2*trunc margin.
  mesh.vertices.push_back(Vec3(-0.1, -0.1, 2.0 + trunc));
  mesh.vertices.push_back(Vec3(0.1, -0.1, 2.0 + trunc));
  mesh.vertices.push_back(Vec3(0, 0.1, 2.0 + trunc));
  mesh.triangles.push_back({9, 10, 11});

  const TriangleMesh culled = cull_mesh(mesh, poses, intr, depths, trunc);
  REQUIRE(culled.triangles.size() == 2);
  // The survivors are the observed face and the in-margin face.
  for (const auto& tri : culled.triangles) {
    const double z = culled.vertices[static_cast<std::size_t>(tri[0])].z();
    CHECK((z == doctest::Approx(2.0) || z == doctest::Approx(2.0 + trunc)));
  }
}

TEST_CASE("ply export") {
  namespace fs = std::filesystem;
  TriangleMesh mesh;
  mesh.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  mesh.colors = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  mesh.triangles.push_back({0, 1, 2});
  const std::string path = (fs::temp_directory_path() / "trislam_mesh.ply").string();
  write_ply(path, mesh);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "ply");
  std::string body((std::istreambuf_iterator<char>(in)), {});
  CHECK(body.find("element vertex 3") != std::string::npos);
  CHECK(body.find("element face 1") != std::string::npos);
  CHECK(body.find("255 0 0") != std::string::npos);
  fs::remove(path);
}
