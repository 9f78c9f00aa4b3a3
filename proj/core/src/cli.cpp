#include "trislam/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <json.hpp>

#include "trislam/config.hpp"
#include "trislam/evaluation.hpp"
#include "trislam/logging.hpp"

namespace trislam {

namespace fs = std::filesystem;

namespace {

int cmd_generate(const std::string& scene_name, const std::string& traj_kind, int frames,
                 int width, int height, const std::string& out_dir, double depth_noise,
                 std::uint64_t seed) {
  const AnalyticScene scene = scene_by_name(scene_name);

  CameraIntrinsics intr;
  intr.width = width;
  intr.height = height;
  intr.fx = width / 2.0;  // 90 degree horizontal field of view
  intr.fy = width / 2.0;
  intr.cx = width / 2.0;
  intr.cy = height / 2.0;
  intr.depth_scale = 5000.0;

  TrajectorySpec traj;
  traj.frames = frames;
  if (traj_kind == "orbit")
    traj.kind = TrajectorySpec::Kind::Orbit;
  else if (traj_kind == "lissajous")
    traj.kind = TrajectorySpec::Kind::Lissajous;
  else if (traj_kind == "waypoints") {
    traj.kind = TrajectorySpec::Kind::WaypointLerp;
    traj.waypoints = {Vec3(1.2, 0, 1.5), Vec3(0, 1.2, 1.3), Vec3(-1.2, 0, 1.5),
                      Vec3(0, -1.2, 1.7)};
  } else {
    throw std::runtime_error("unknown trajectory kind: " + traj_kind);
  }

  DatasetGenOptions opts;
  opts.depth_noise_sigma = depth_noise;
  opts.seed = seed;
  generate_dataset(scene, traj, intr, out_dir, opts);
  log::info("wrote ", frames, " frames to ", out_dir);
  return 0;
}

int cmd_run(const RunConfig& cfg) {
  const Dataset dataset(cfg.data_dir);
  fs::create_directories(cfg.out_dir);
  write_config(cfg.slam, (fs::path(cfg.out_dir) / "config.txt").string());
  const RunOutputs outputs = run_slam(dataset, cfg.slam, cfg.out_dir);
  log::info("trajectory written to ", outputs.trajectory_path);
  return 0;
}

int cmd_eval(const std::string& gt_path, const std::string& est_path, const std::string& data_dir,
             const std::string& run_dir, const std::string& scene_name, int stride, double voxel,
             std::uint64_t seed) {
  nlohmann::json result;
  const Trajectory gt = read_trajectory(gt_path);
  const Trajectory est = read_trajectory(est_path);
  result["ate_rmse_cm"] = ate_rmse_cm(est, gt);

  if (!data_dir.empty() && !run_dir.empty()) {
    const Dataset dataset(data_dir);
    LoadedCheckpoint ck = load_checkpoint((fs::path(run_dir) / "checkpoint.txt").string(),
                                          (fs::path(run_dir) / "checkpoint.bin").string());
    std::vector<Pose> poses;
    std::vector<DepthImage> depths;
    for (int i = 0; i < dataset.frame_count(); ++i) {
      poses.push_back(est[static_cast<std::size_t>(i)].pose);
      depths.push_back(dataset.load_depth(i));
    }
    RenderConfig rcfg;  // defaults match the training renderer
    Rng rng(seed);
    result["depth_l1_cm"] = depth_l1_cm_for_field(ck.store, ck.field(), poses, depths,
                                                  dataset.intrinsics(), stride, rcfg, rng);

    if (!scene_name.empty()) {
      const AnalyticScene scene = scene_by_name(scene_name);
      TriangleMesh mesh = extract_mesh(ck.store, ck.field(), voxel);
      mesh = cull_mesh(mesh, poses, dataset.intrinsics(), depths, rcfg.trunc);
      Rng chamfer_rng(seed + 1);
      const ChamferResult chamfer = chamfer_vs_scene(mesh, scene, 10000, chamfer_rng);
      result["chamfer_accuracy_cm"] = chamfer.accuracy_cm;
      result["chamfer_completion_cm"] = chamfer.completion_cm;
      result["mesh_faces"] = mesh.triangles.size();
    }
  }
  std::cout << result.dump(2) << std::endl;
  return 0;
}

int cmd_mesh(const std::string& run_dir, const std::string& data_dir, const std::string& out_path,
             double voxel, bool no_cull) {
  LoadedCheckpoint ck = load_checkpoint((fs::path(run_dir) / "checkpoint.txt").string(),
                                        (fs::path(run_dir) / "checkpoint.bin").string());
  TriangleMesh mesh = extract_mesh(ck.store, ck.field(), voxel);
  log::info("extracted mesh: ", mesh.vertices.size(), " vertices, ", mesh.triangles.size(),
            " faces");
  if (!no_cull) {
    if (data_dir.empty())
      throw std::runtime_error("mesh culling needs --data (or pass --no-cull)");
    const Dataset dataset(data_dir);
    const Trajectory est = read_trajectory((fs::path(run_dir) / "trajectory.txt").string());
    std::vector<Pose> poses;
    std::vector<DepthImage> depths;
    for (int i = 0; i < dataset.frame_count(); ++i) {
      poses.push_back(est[static_cast<std::size_t>(i)].pose);
      depths.push_back(dataset.load_depth(i));
    }
    RenderConfig rcfg;
    mesh = cull_mesh(mesh, poses, dataset.intrinsics(), depths, rcfg.trunc);
    log::info("after culling: ", mesh.triangles.size(), " faces");
  }
  write_ply(out_path, mesh);
  log::info("mesh written to ", out_path);
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"multi-submap tri-plane RGB-D SLAM"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "render a synthetic RGB-D dataset");
  std::string gen_scene = "box-room", gen_traj = "orbit", gen_out;
  int gen_frames = 100, gen_width = 64, gen_height = 48;
  double gen_noise = 0.0;
  std::uint64_t gen_seed = 0;
  gen->add_option("--scene", gen_scene, "scene name (box-room)");
  gen->add_option("--traj", gen_traj, "trajectory kind: orbit|lissajous|waypoints");
  gen->add_option("--frames", gen_frames, "number of frames");
  gen->add_option("--width", gen_width, "image width");
  gen->add_option("--height", gen_height, "image height");
  gen->add_option("--depth-noise", gen_noise, "Gaussian depth noise sigma (m)");
  gen->add_option("--seed", gen_seed, "rng seed");
  gen->add_option("--out", gen_out, "output directory")->required();

  // run
  auto* run = app.add_subcommand("run", "run SLAM over a dataset");
  RunConfig run_cfg;
  std::string run_config_file;
  std::vector<std::string> run_sets;
  bool run_grid_hash = false, run_single_map = false, run_no_ba = false;
  bool run_paper_literal = false, run_threaded = false;
  std::string run_precision;
  double run_noise_t = -1, run_noise_r = -1;
  std::int64_t run_seed = -1;
  run->add_option("--data", run_cfg.data_dir, "dataset directory")->required();
  run->add_option("--out", run_cfg.out_dir, "output directory")->required();
  run->add_option("--config", run_config_file, "flat key=value config file");
  run->add_option("--set", run_sets, "config override key=value (repeatable)");
  run->add_option("--seed", run_seed, "rng seed");
  run->add_flag("--grid-hash", run_grid_hash, "replace tri-planes by 3D hash grids (3x table)");
  run->add_flag("--single-map", run_single_map, "never allocate beyond the first submap");
  run->add_flag("--no-ba", run_no_ba, "disable global bundle adjustment");
  run->add_flag("--paper-literal-tsdf", run_paper_literal,
                "use the unnormalized TSDF residual form");
  run->add_flag("--threaded", run_threaded, "overlap mapping with tracking");
  run->add_option("--precision", run_precision, "double|single parameter storage");
  run->add_option("--pose-noise-t", run_noise_t, "per-frame translation noise sigma (m)");
  run->add_option("--pose-noise-r", run_noise_r, "per-frame rotation noise sigma (deg)");

  // eval
  auto* eval = app.add_subcommand("eval", "trajectory and reconstruction metrics (JSON)");
  std::string eval_gt, eval_est, eval_data, eval_run, eval_scene;
  int eval_stride = 4;
  double eval_voxel = 0.02;
  std::uint64_t eval_seed = 0;
  eval->add_option("--gt", eval_gt, "ground-truth trajectory")->required();
  eval->add_option("--est", eval_est, "estimated trajectory")->required();
  eval->add_option("--data", eval_data, "dataset directory (enables depth L1)");
  eval->add_option("--run", eval_run, "run output directory with checkpoint");
  eval->add_option("--scene", eval_scene, "analytic scene name (enables chamfer)");
  eval->add_option("--stride", eval_stride, "pixel/frame stride for depth L1");
  eval->add_option("--voxel", eval_voxel, "mesh voxel size (m)");
  eval->add_option("--seed", eval_seed, "rng seed");

  // mesh
  auto* mesh = app.add_subcommand("mesh", "extract and cull the reconstructed mesh");
  std::string mesh_run, mesh_data, mesh_out;
  double mesh_voxel = 0.02;
  bool mesh_no_cull = false;
  mesh->add_option("--run", mesh_run, "run output directory with checkpoint")->required();
  mesh->add_option("--data", mesh_data, "dataset directory (for culling)");
  mesh->add_option("--out", mesh_out, "output PLY path")->required();
  mesh->add_option("--voxel", mesh_voxel, "voxel size (m)");
  mesh->add_flag("--no-cull", mesh_no_cull, "skip frustum/occlusion culling");

  std::vector<const char*> argv;
  argv.push_back("slam");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help() << std::endl;
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::endl;
    return 2;
  }

  try {
    if (gen->parsed())
      return cmd_generate(gen_scene, gen_traj, gen_frames, gen_width, gen_height, gen_out,
                          gen_noise, gen_seed);
    if (run->parsed()) {
      if (!run_config_file.empty()) load_config_file(run_cfg.slam, run_config_file);
      for (const auto& kv : run_sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::runtime_error("--set expects key=value: " + kv);
        config_set(run_cfg.slam, kv.substr(0, eq), kv.substr(eq + 1));
      }
      if (run_seed >= 0) run_cfg.slam.seed = static_cast<std::uint64_t>(run_seed);
      if (run_grid_hash) run_cfg.slam.field.grid_hash = true;
      if (run_single_map) run_cfg.slam.single_map = true;
      if (run_no_ba) run_cfg.slam.no_ba = true;
      if (run_paper_literal) run_cfg.slam.loss_weights.paper_literal_tsdf = true;
      if (run_threaded) run_cfg.slam.threaded = true;
      if (!run_precision.empty()) config_set(run_cfg.slam, "precision", run_precision);
      if (run_noise_t >= 0) run_cfg.slam.pose_noise_t = run_noise_t;
      if (run_noise_r >= 0) run_cfg.slam.pose_noise_r_deg = run_noise_r;
      return cmd_run(run_cfg);
    }
    if (eval->parsed())
      return cmd_eval(eval_gt, eval_est, eval_data, eval_run, eval_scene, eval_stride, eval_voxel,
                      eval_seed);
    if (mesh->parsed()) return cmd_mesh(mesh_run, mesh_data, mesh_out, mesh_voxel, mesh_no_cull);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 2;
}

}  // namespace trislam
