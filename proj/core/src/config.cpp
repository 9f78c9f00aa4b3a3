#include "trislam/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace trislam {

namespace {

struct Binding {
  const char* key;
  std::function<void(SlamConfig&, const std::string&)> set;
  std::function<std::string(const SlamConfig&)> get;
};

int parse_int(const std::string& v) {
  std::size_t pos = 0;
  const int x = std::stoi(v, &pos);
  if (pos != v.size()) throw std::runtime_error("not an integer: " + v);
  return x;
}

double parse_double(const std::string& v) {
  std::size_t pos = 0;
  const double x = std::stod(v, &pos);
  if (pos != v.size()) throw std::runtime_error("not a number: " + v);
  return x;
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw std::runtime_error("not a boolean: " + v);
}

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

#define INT_FIELD(name, expr)                                                      \
  Binding{name, [](SlamConfig& c, const std::string& v) { c.expr = parse_int(v); }, \
          [](const SlamConfig& c) { return std::to_string(c.expr); }}
#define DBL_FIELD(name, expr)                                                         \
  Binding{name, [](SlamConfig& c, const std::string& v) { c.expr = parse_double(v); }, \
          [](const SlamConfig& c) { return fmt_double(c.expr); }}
#define BOOL_FIELD(name, expr)                                                      \
  Binding{name, [](SlamConfig& c, const std::string& v) { c.expr = parse_bool(v); }, \
          [](const SlamConfig& c) { return std::string(c.expr ? "1" : "0"); }}

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = {
      INT_FIELD("map_every", map_every),
      INT_FIELD("covisible_keyframes", covisible_keyframes),
      INT_FIELD("ba_keyframes", ba_keyframes),
      INT_FIELD("ba_interval", ba_interval),
      INT_FIELD("ba_min_keyframes", ba_min_keyframes),
      INT_FIELD("rays_track", rays_track),
      INT_FIELD("rays_map", rays_map),
      INT_FIELD("iters_track", iters_track),
      INT_FIELD("iters_map", iters_map),
      INT_FIELD("iters_ba", iters_ba),
      DBL_FIELD("threshold_p", threshold_p),
      DBL_FIELD("expansion_l", expansion_l),
      DBL_FIELD("near", render.near),
      DBL_FIELD("trunc", render.trunc),
      INT_FIELD("n_regular", render.n_regular),
      INT_FIELD("n_surface", render.n_surface),
      DBL_FIELD("far_factor", render.far_factor),
      DBL_FIELD("lambda_rgb", loss_weights.rgb),
      DBL_FIELD("lambda_depth", loss_weights.depth),
      DBL_FIELD("lambda_fs", loss_weights.fs),
      DBL_FIELD("lambda_mid", loss_weights.mid),
      DBL_FIELD("lambda_tail", loss_weights.tail),
      BOOL_FIELD("paper_literal_tsdf", loss_weights.paper_literal_tsdf),
      INT_FIELD("levels", field.levels),
      INT_FIELD("base_res", field.base_res),
      INT_FIELD("feat_dim", field.feat_dim),
      INT_FIELD("hidden_dim", field.hidden_dim),
      DBL_FIELD("lr_hash", field.lr_hash),
      BOOL_FIELD("grid_hash", field.grid_hash),
      DBL_FIELD("adam_beta1", adam.beta1),
      DBL_FIELD("adam_beta2", adam.beta2),
      DBL_FIELD("adam_eps", adam.eps),
      DBL_FIELD("lr_mlp", lr_mlp),
      DBL_FIELD("lr_beta", lr_beta),
      DBL_FIELD("lr_pose_track", lr_pose_track),
      DBL_FIELD("lr_pose_map", lr_pose_map),
      DBL_FIELD("beta_init", beta_init),
      INT_FIELD("alloc_samples", alloc_samples),
      DBL_FIELD("depth_max", depth_max),
      INT_FIELD("covis_probe_pixels", covis_probe_pixels),
      DBL_FIELD("covis_min_score", covis_min_score),
      INT_FIELD("track_min_valid_pixels", track_min_valid_pixels),
      BOOL_FIELD("alloc_every_frame", alloc_every_frame),
      BOOL_FIELD("single_map", single_map),
      BOOL_FIELD("no_ba", no_ba),
      BOOL_FIELD("threaded", threaded),
      DBL_FIELD("pose_noise_t", pose_noise_t),
      DBL_FIELD("pose_noise_r_deg", pose_noise_r_deg),
      Binding{"seed",
              [](SlamConfig& c, const std::string& v) {
                c.seed = std::stoull(v);
              },
              [](const SlamConfig& c) { return std::to_string(c.seed); }},
      Binding{"precision",
              [](SlamConfig& c, const std::string& v) {
                if (v == "double")
                  c.single_precision = false;
                else if (v == "single")
                  c.single_precision = true;
                else
                  throw std::runtime_error("precision must be 'double' or 'single'");
              },
              [](const SlamConfig& c) {
                return std::string(c.single_precision ? "single" : "double");
              }},
  };
  return table;
}

#undef INT_FIELD
#undef DBL_FIELD
#undef BOOL_FIELD

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& b : bindings()) keys.push_back(b.key);
  return keys;
}

void config_set(SlamConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& b : bindings()) {
    if (key == b.key) {
      b.set(cfg, value);
      return;
    }
  }
  throw std::runtime_error("unknown config key: " + key);
}

std::string config_get(const SlamConfig& cfg, const std::string& key) {
  for (const auto& b : bindings()) {
    if (key == b.key) return b.get(cfg);
  }
  throw std::runtime_error("unknown config key: " + key);
}

namespace {
std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}
}  // namespace

void load_config_file(SlamConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    config_set(cfg, key, value);
  }
}

void write_config(const SlamConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  for (const auto& key : config_keys()) out << key << " = " << config_get(cfg, key) << "\n";
}

}  // namespace trislam
