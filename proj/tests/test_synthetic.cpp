#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "trislam/synthetic.hpp"

using namespace trislam;

TEST_CASE("scene sdf") {
  SUBCASE("unit sphere") {
    AnalyticScene scene;
    Primitive s;
    s.shape = Primitive::Shape::Sphere;
    s.center = Vec3::Zero();
    s.radius = 1.0;
    scene.primitives.push_back(s);
    CHECK(scene_sdf(scene, Vec3(2, 0, 0)) == doctest::Approx(1.0));
    CHECK(scene_sdf(scene, Vec3(0, 0, 0)) == doctest::Approx(-1.0));
  }
  SUBCASE("point on a box face") {
    AnalyticScene scene;
    Primitive b;
    b.shape = Primitive::Shape::Box;
    b.center = Vec3::Zero();
    b.half_extent = Vec3(1, 2, 3);
    scene.primitives.push_back(b);
    CHECK(scene_sdf(scene, Vec3(1, 0, 0)) == doctest::Approx(0.0));
    CHECK(scene_sdf(scene, Vec3(3, 0, 0)) == doctest::Approx(2.0));
  }
  SUBCASE("union takes the minimum") {
    AnalyticScene scene;
    Primitive a, b;
    a.shape = b.shape = Primitive::Shape::Sphere;
    a.center = Vec3(-1, 0, 0);
    b.center = Vec3(1, 0, 0);
    a.radius = b.radius = 0.5;
    scene.primitives = {a, b};
    const Vec3 p(0.6, 0, 0);
    const double expected = std::min((p - a.center).norm() - 0.5, (p - b.center).norm() - 0.5);
    CHECK(scene_sdf(scene, p) == doctest::Approx(expected));
  }
  SUBCASE("subtraction carves") {
    AnalyticScene scene;
    Primitive solid, hole;
    solid.shape = Primitive::Shape::Box;
    solid.half_extent = Vec3(2, 2, 2);
    hole.shape = Primitive::Shape::Sphere;
    hole.radius = 1.0;
    hole.op = Primitive::Op::Subtraction;
    scene.primitives = {solid, hole};
    // Center of the carved cavity is outside matter, 1 m from the cavity wall.
    CHECK(scene_sdf(scene, Vec3::Zero()) == doctest::Approx(1.0));
  }
  SUBCASE("color follows the attaining primitive") {
    AnalyticScene scene;
    Primitive a, b;
    a.shape = b.shape = Primitive::Shape::Sphere;
    a.center = Vec3(-1, 0, 0);
    b.center = Vec3(1, 0, 0);
    a.radius = b.radius = 0.5;
    a.color = Vec3(1, 0, 0);
    b.color = Vec3(0, 1, 0);
    scene.primitives = {a, b};
    CHECK((scene_color(scene, Vec3(-0.8, 0, 0)) - a.color).norm() == 0.0);
    CHECK((scene_color(scene, Vec3(0.8, 0, 0)) - b.color).norm() == 0.0);
  }
  SUBCASE("empty scene") {
    AnalyticScene scene;
    CHECK_THROWS_AS(scene_sdf(scene, Vec3::Zero()), std::runtime_error);
  }
}

TEST_CASE("trajectory poses keep the target in front") {
  TrajectorySpec spec;
  spec.frames = 60;
  for (auto kind : {TrajectorySpec::Kind::Orbit, TrajectorySpec::Kind::Lissajous}) {
    spec.kind = kind;
    for (int i = 0; i < spec.frames; ++i) {
      const Pose pose = trajectory_pose(spec, i);
      const Vec3 cam = pose.q.conjugate() * (spec.look_at - pose.t);
      CHECK(cam.z() > 0.0);
    }
  }
  spec.kind = TrajectorySpec::Kind::WaypointLerp;
  spec.waypoints = {Vec3(1, 0, 1.5), Vec3(0, 1, 1.5), Vec3(-1, 0, 1.5)};
  for (int i = 0; i < spec.frames; ++i) {
    const Pose pose = trajectory_pose(spec, i);
    const Vec3 cam = pose.q.conjugate() * (spec.look_at - pose.t);
    CHECK(cam.z() > 0.0);
  }
}

namespace {
CameraIntrinsics test_intr() {
  CameraIntrinsics intr;
  intr.width = 64;
  intr.height = 48;
  intr.fx = intr.fy = 32;
  intr.cx = 32;
  intr.cy = 24;
  intr.depth_scale = 5000;
  return intr;
}
}  // namespace

TEST_CASE("render_gt_frame") {
  const CameraIntrinsics intr = test_intr();
  SUBCASE("head-on wall depth") {
    AnalyticScene scene;
    Primitive wall;
    wall.shape = Primitive::Shape::Box;
    wall.center = Vec3(0, 0, 2.55);
    wall.half_extent = Vec3(10, 10, 0.55);
    scene.primitives = {wall};
    ColorImage color;
    DepthImage depth;
    render_gt_frame(scene, intr, Pose::identity(), &color, &depth);
    CHECK(depth.at(32, 24) == doctest::Approx(2.0).epsilon(1e-3));
  }
  SUBCASE("rays that miss get depth 0") {
    AnalyticScene scene;
    Primitive ball;
    ball.shape = Primitive::Shape::Sphere;
    ball.center = Vec3(0, 0, 2);
    ball.radius = 0.2;
    scene.primitives = {ball};
    ColorImage color;
    DepthImage depth;
    render_gt_frame(scene, intr, Pose::identity(), &color, &depth);
    CHECK(depth.at(32, 24) > 0.0);  // center hits the ball
    CHECK(depth.at(0, 0) == 0.0);   // corner misses everything
  }
  SUBCASE("sphere depth matches the closed-form intersection") {
    AnalyticScene scene;
    Primitive ball;
    ball.shape = Primitive::Shape::Sphere;
    ball.center = Vec3(0.2, -0.1, 2.5);
    ball.radius = 0.8;
    scene.primitives = {ball};
    ColorImage color;
    DepthImage depth;
    render_gt_frame(scene, intr, Pose::identity(), &color, &depth);

    Rng rng(3);
    int tested = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const int u = static_cast<int>(rng.uniform_index(intr.width));
      const int v = static_cast<int>(rng.uniform_index(intr.height));
      // Closed-form ray-sphere intersection along the unit ray direction.
      const Vec3 k = pixel_camera_dir(intr, u, v);
      const Vec3 dir = k.normalized();
      const Vec3 oc = -ball.center;  // camera at origin
      const double b = 2.0 * dir.dot(oc);
      const double c = oc.squaredNorm() - ball.radius * ball.radius;
      const double disc = b * b - 4 * c;
      if (disc <= 0) {
        CHECK(depth.at(u, v) == 0.0);
        continue;
      }
      const double t_hit = (-b - std::sqrt(disc)) / 2.0;
      if (t_hit <= 0) continue;
      const double z = t_hit * dir.z();
      CHECK(depth.at(u, v) == doctest::Approx(z).epsilon(2e-3));
      ++tested;
    }
    CHECK(tested > 100);
  }
  SUBCASE("box-room gt depth is consistent with the scene sdf") {
    const AnalyticScene scene = box_room_scene();
    TrajectorySpec traj;
    traj.frames = 4;
    ColorImage color;
    DepthImage depth;
    for (int f = 0; f < traj.frames; ++f) {
      const Pose pose = trajectory_pose(traj, f);
      render_gt_frame(scene, intr, pose, &color, &depth);
      int checked = 0;
      for (int v = 0; v < intr.height; v += 5) {
        for (int u = 0; u < intr.width; u += 5) {
          const double d = depth.at(u, v);
          if (d <= 0) continue;
          const Vec3 p = back_project(intr, pose, u, v, d);
          CHECK(std::abs(scene_sdf(scene, p)) < 2e-3);
          ++checked;
        }
      }
      CHECK(checked > 20);
    }
  }
}

TEST_CASE("generate_dataset") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "trislam_dataset_test";
  fs::remove_all(dir);

  const AnalyticScene scene = box_room_scene();
  const CameraIntrinsics intr = test_intr();
  TrajectorySpec traj;
  traj.frames = 10;

  generate_dataset(scene, traj, intr, dir.string());

  SUBCASE("frame and trajectory counts") {
    int ppm = 0, pgm = 0;
    for (const auto& e : fs::directory_iterator(dir / "color")) ppm += e.is_regular_file();
    for (const auto& e : fs::directory_iterator(dir / "depth")) pgm += e.is_regular_file();
    CHECK(ppm == 10);
    CHECK(pgm == 10);
    CHECK(read_trajectory((dir / "groundtruth.txt").string()).size() == 10);
  }
  SUBCASE("depth image round trip within quantization") {
    const Dataset dataset(dir.string());
    ColorImage color;
    DepthImage rendered;
    render_gt_frame(scene, intr, trajectory_pose(traj, 3), &color, &rendered);
    const DepthImage loaded = dataset.load_depth(3);
    for (std::size_t i = 0; i < rendered.depths.size(); ++i)
      CHECK(std::abs(loaded.depths[i] - rendered.depths[i]) <= 1.0 / intr.depth_scale);
  }
  SUBCASE("regeneration is byte-identical") {
    const fs::path dir2 = fs::temp_directory_path() / "trislam_dataset_test2";
    fs::remove_all(dir2);
    generate_dataset(scene, traj, intr, dir2.string());
    auto read_bytes = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      return std::string(std::istreambuf_iterator<char>(in), {});
    };
    CHECK(read_bytes(dir / "depth" / "000007.pgm") == read_bytes(dir2 / "depth" / "000007.pgm"));
    CHECK(read_bytes(dir / "color" / "000007.ppm") == read_bytes(dir2 / "color" / "000007.ppm"));
    CHECK(read_bytes(dir / "groundtruth.txt") == read_bytes(dir2 / "groundtruth.txt"));
    fs::remove_all(dir2);
  }
  fs::remove_all(dir);
}
