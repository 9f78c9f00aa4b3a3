#include "trislam/mesh.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace trislam {

namespace {

// Cube corner c = x | y<<1 | z<<2. Canonical edge ids: x-edges 0..3,
// y-edges 4..7, z-edges 8..11, indexed by the lower corner.
int edge_id(int corner, int axis) {
  switch (axis) {
    case 0: return corner >> 1;                             // {0,2,4,6} -> 0..3
    case 1: return 4 + ((corner & 1) | ((corner >> 2) << 1));  // {0,1,4,5} -> 0..3
    default: return 8 + corner;                             // {0,1,2,3} -> 0..3
  }
}

int edge_between(int a, int b) {
  const int diff = a ^ b;
  const int axis = diff == 1 ? 0 : diff == 2 ? 1 : 2;
  return edge_id(std::min(a, b), axis);
}

// Lower corner and axis for each canonical edge id.
constexpr int kEdgeCorner[12] = {0, 2, 4, 6, 0, 1, 4, 5, 0, 1, 2, 3};
constexpr int kEdgeAxis[12] = {0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2};

// Six faces, each as 4 corners in cyclic order.
constexpr int kFaces[6][4] = {
    {0, 2, 6, 4},  // x = 0
    {1, 3, 7, 5},  // x = 1
    {0, 1, 5, 4},  // y = 0
    {2, 3, 7, 6},  // y = 1
    {0, 1, 3, 2},  // z = 0
    {4, 5, 7, 6},  // z = 1
};

struct CellSegments {
  // Pairs of cube edge ids describing iso-line segments on cube faces.
  std::array<std::pair<int, int>, 12> segs;
  int count = 0;
  void add(int a, int b) { segs[static_cast<std::size_t>(count++)] = {a, b}; }
};

// Marching squares on one face with a value-symmetric ambiguity rule.
void face_segments(const double v[8], const int corners[4], CellSegments& out) {
  bool inside[4];
  for (int i = 0; i < 4; ++i) inside[i] = v[corners[i]] < 0.0;
  int crossings[4];
  int n_cross = 0;
  int cross_local[4];
  for (int l = 0; l < 4; ++l) {
    if (inside[l] != inside[(l + 1) % 4]) {
      cross_local[n_cross] = l;
      crossings[n_cross] = edge_between(corners[l], corners[(l + 1) % 4]);
      ++n_cross;
    }
  }
  if (n_cross == 0) return;
  if (n_cross == 2) {
    out.add(crossings[0], crossings[1]);
    return;
  }
  // Diagonal case: decide by the bilinear saddle value, which both adjacent
  // cubes compute from the same four samples.
  const double f0 = v[corners[0]], f1 = v[corners[1]], f2 = v[corners[2]], f3 = v[corners[3]];
  const double denom = f0 + f2 - f1 - f3;
  const double saddle = std::abs(denom) > 1e-300 ? (f0 * f2 - f1 * f3) / denom : 1.0;
  const bool saddle_inside = saddle < 0.0;
  // Loop around each corner of the separated diagonal: the pair left
  // unconnected through the face center.
  const bool loop_inside_corners = !saddle_inside;
  const int first = (inside[0] == loop_inside_corners) ? 0 : 1;  // corners first and first+2
  auto adjacent = [&](int corner_local) {
    const int prev = (corner_local + 3) % 4;
    out.add(edge_between(corners[prev], corners[corner_local]),
            edge_between(corners[corner_local], corners[(corner_local + 1) % 4]));
  };
  (void)cross_local;
  adjacent(first);
  adjacent(first + 2);
}

}  // namespace

TriangleMesh marching_cubes(const ScalarField& field, const Aabb& bounds, double voxel) {
  if (!(voxel > 0)) throw std::runtime_error("marching_cubes: voxel size must be positive");
  const Vec3 ext = bounds.extent();
  const int nx = std::max(2, static_cast<int>(std::ceil(ext.x() / voxel)) + 1);
  const int ny = std::max(2, static_cast<int>(std::ceil(ext.y() / voxel)) + 1);
  const int nz = std::max(2, static_cast<int>(std::ceil(ext.z() / voxel)) + 1);

  TriangleMesh mesh;
  std::unordered_map<std::int64_t, int> vertex_of_edge;

  auto grid_pos = [&](int i, int j, int k) {
    return Vec3(bounds.min.x() + i * voxel, bounds.min.y() + j * voxel,
                bounds.min.z() + k * voxel);
  };
  auto edge_key = [&](int i, int j, int k, int axis) {
    return ((static_cast<std::int64_t>(i) * ny + j) * nz + k) * 3 + axis;
  };

  std::vector<double> slice_a(static_cast<std::size_t>(nx) * ny);
  std::vector<double> slice_b(static_cast<std::size_t>(nx) * ny);
  auto fill_slice = [&](std::vector<double>& slice, int k) {
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        slice[static_cast<std::size_t>(j) * nx + i] = field(grid_pos(i, j, k));
  };
  fill_slice(slice_a, 0);

  for (int k = 0; k + 1 < nz; ++k) {
    fill_slice(slice_b, k + 1);
    const std::vector<double>* slices[2] = {&slice_a, &slice_b};
    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i + 1 < nx; ++i) {
        double v[8];
        bool any_in = false, any_out = false;
        for (int c = 0; c < 8; ++c) {
          const int ci = i + (c & 1);
          const int cj = j + ((c >> 1) & 1);
          const int ck = (c >> 2) & 1;
          v[c] = (*slices[ck])[static_cast<std::size_t>(cj) * nx + ci];
          (v[c] < 0 ? any_in : any_out) = true;
        }
        if (!any_in || !any_out) continue;

        CellSegments segments;
        for (const auto& face : kFaces) face_segments(v, face, segments);
        if (segments.count == 0) continue;

        // Vertex for every crossing edge of this cube.
        int cube_vertex[12];
        for (int e = 0; e < 12; ++e) cube_vertex[e] = -1;
        auto vertex_for_edge = [&](int e) {
          if (cube_vertex[e] >= 0) return cube_vertex[e];
          const int corner = kEdgeCorner[e];
          const int axis = kEdgeAxis[e];
          const int other = corner | (1 << axis);
          const double va = v[corner], vb = v[other];
          const int gi = i + (corner & 1);
          const int gj = j + ((corner >> 1) & 1);
          const int gk = k + ((corner >> 2) & 1);
          const std::int64_t key = edge_key(gi, gj, gk, axis);
          auto it = vertex_of_edge.find(key);
          if (it != vertex_of_edge.end()) {
            cube_vertex[e] = it->second;
            return it->second;
          }
          const double t = va / (va - vb);
          Vec3 pos = grid_pos(gi, gj, gk);
          pos[axis] += t * voxel;
          const int id = static_cast<int>(mesh.vertices.size());
          mesh.vertices.push_back(pos);
          vertex_of_edge.emplace(key, id);
          cube_vertex[e] = id;
          return id;
        };

        // Trace closed polygons through the 2-regular segment graph.
        std::array<std::array<int, 2>, 12> seg_at_edge;  // segment indices per edge
        std::array<int, 12> seg_count{};
        for (int s = 0; s < segments.count; ++s) {
          const auto& [a, b] = segments.segs[static_cast<std::size_t>(s)];
          seg_at_edge[static_cast<std::size_t>(a)][static_cast<std::size_t>(seg_count[static_cast<std::size_t>(a)]++)] = s;
          seg_at_edge[static_cast<std::size_t>(b)][static_cast<std::size_t>(seg_count[static_cast<std::size_t>(b)]++)] = s;
        }
        // Cube-center gradient for orientation.
        Vec3 grad(v[1] + v[3] + v[5] + v[7] - v[0] - v[2] - v[4] - v[6],
                  v[2] + v[3] + v[6] + v[7] - v[0] - v[1] - v[4] - v[5],
                  v[4] + v[5] + v[6] + v[7] - v[0] - v[1] - v[2] - v[3]);

        bool used[12] = {};
        for (int s0 = 0; s0 < segments.count; ++s0) {
          if (used[s0]) continue;
          std::vector<int> poly_edges;
          int current = s0;
          int entry_edge = segments.segs[static_cast<std::size_t>(s0)].first;
          while (!used[current]) {
            used[current] = true;
            const auto& [a, b] = segments.segs[static_cast<std::size_t>(current)];
            const int exit_edge = (a == entry_edge) ? b : a;
            poly_edges.push_back(entry_edge);
            // Next segment sharing exit_edge.
            const auto& cands = seg_at_edge[static_cast<std::size_t>(exit_edge)];
            const int next = (cands[0] == current) ? cands[1] : cands[0];
            entry_edge = exit_edge;
            current = next;
          }
          if (poly_edges.size() < 3) continue;

          std::vector<int> poly;
          poly.reserve(poly_edges.size());
          for (int e : poly_edges) poly.push_back(vertex_for_edge(e));

          // Newell normal vs gradient decides winding.
          Vec3 normal = Vec3::Zero();
          for (std::size_t a_i = 0; a_i < poly.size(); ++a_i) {
            const Vec3& pa = mesh.vertices[static_cast<std::size_t>(poly[a_i])];
            const Vec3& pb = mesh.vertices[static_cast<std::size_t>(poly[(a_i + 1) % poly.size()])];
            normal += pa.cross(pb);
          }
          if (normal.dot(grad) < 0) std::reverse(poly.begin(), poly.end());
          for (std::size_t t = 1; t + 1 < poly.size(); ++t)
            mesh.triangles.push_back({poly[0], poly[t], poly[t + 1]});
        }
      }
    }
    std::swap(slice_a, slice_b);
  }

  // Drop degenerate triangles.
  std::vector<std::array<int, 3>> kept;
  kept.reserve(mesh.triangles.size());
  for (const auto& tri : mesh.triangles) {
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(tri[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(tri[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(tri[2])];
    if (0.5 * ((b - a).cross(c - a)).norm() > 1e-12) kept.push_back(tri);
  }
  mesh.triangles = std::move(kept);
  return mesh;
}

TriangleMesh extract_mesh(const ParamStore& store, const SceneField& field, double voxel) {
  if (field.manager->size() == 0) throw std::runtime_error("extract_mesh: no submaps");
  Aabb bounds = field.manager->submap(0).bounds();
  for (std::size_t i = 1; i < field.manager->size(); ++i) {
    bounds.expand_to(field.manager->submap(i).bounds().min);
    bounds.expand_to(field.manager->submap(i).bounds().max);
  }
  auto sdf = [&](const Vec3& p) { return query_field(store, field, p).s; };
  TriangleMesh mesh = marching_cubes(sdf, bounds, voxel);
  mesh.colors.reserve(mesh.vertices.size());
  for (const Vec3& vert : mesh.vertices)
    mesh.colors.push_back(query_field(store, field, vert).color);
  return mesh;
}

TriangleMesh cull_mesh(const TriangleMesh& mesh, const std::vector<Pose>& poses,
                       const CameraIntrinsics& intr, const std::vector<DepthImage>& depths,
                       double trunc) {
  std::vector<char> keep_face(mesh.triangles.size(), 0);
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const auto& tri = mesh.triangles[f];
    const Vec3 centroid = (mesh.vertices[static_cast<std::size_t>(tri[0])] +
                           mesh.vertices[static_cast<std::size_t>(tri[1])] +
                           mesh.vertices[static_cast<std::size_t>(tri[2])]) /
                          3.0;
    for (std::size_t i = 0; i < poses.size(); ++i) {
      const auto proj = project_point(intr, poses[i], centroid);
      if (!proj) continue;
      const int u = static_cast<int>(std::lround(proj->u));
      const int v = static_cast<int>(std::lround(proj->v));
      if (u < 0 || u >= intr.width || v < 0 || v >= intr.height) continue;
      const double observed = depths[i].at(u, v);
      if (proj->z <= observed + 2.0 * trunc) {
        keep_face[f] = 1;
        break;
      }
    }
  }

  TriangleMesh out;
  std::vector<int> remap(mesh.vertices.size(), -1);
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    if (!keep_face[f]) continue;
    std::array<int, 3> tri{};
    for (int c = 0; c < 3; ++c) {
      const int old = mesh.triangles[f][static_cast<std::size_t>(c)];
      if (remap[static_cast<std::size_t>(old)] < 0) {
        remap[static_cast<std::size_t>(old)] = static_cast<int>(out.vertices.size());
        out.vertices.push_back(mesh.vertices[static_cast<std::size_t>(old)]);
        if (!mesh.colors.empty()) out.colors.push_back(mesh.colors[static_cast<std::size_t>(old)]);
      }
      tri[static_cast<std::size_t>(c)] = remap[static_cast<std::size_t>(old)];
    }
    out.triangles.push_back(tri);
  }
  return out;
}

void write_ply(const std::string& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write mesh: " + path);
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << mesh.vertices.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "element face " << mesh.triangles.size() << "\n";
  out << "property list uchar int vertex_indices\n";
  out << "end_header\n";
  char buf[160];
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    Vec3 c = i < mesh.colors.size() ? mesh.colors[i] : Vec3(0.7, 0.7, 0.7);
    c = c.cwiseMax(0.0).cwiseMin(1.0);
    std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %d %d %d\n", v.x(), v.y(), v.z(),
                  static_cast<int>(std::lround(c.x() * 255)),
                  static_cast<int>(std::lround(c.y() * 255)),
                  static_cast<int>(std::lround(c.z() * 255)));
    out << buf;
  }
  for (const auto& tri : mesh.triangles)
    out << "3 " << tri[0] << " " << tri[1] << " " << tri[2] << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace trislam
