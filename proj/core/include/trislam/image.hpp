#pragma once

#include <string>
#include <vector>

#include "trislam/geometry.hpp"

namespace trislam {

/// RGB image with channels in [0,1].
struct ColorImage {
  int width = 0, height = 0;
  std::vector<Vec3> pixels;  // row-major

  ColorImage() = default;
  ColorImage(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h, Vec3::Zero()) {}

  Vec3& at(int u, int v) { return pixels[static_cast<size_t>(v) * width + u]; }
  const Vec3& at(int u, int v) const { return pixels[static_cast<size_t>(v) * width + u]; }
};

/// Depth image in meters; 0 marks invalid depth.
struct DepthImage {
  int width = 0, height = 0;
  std::vector<double> depths;  // row-major

  DepthImage() = default;
  DepthImage(int w, int h) : width(w), height(h), depths(static_cast<size_t>(w) * h, 0.0) {}

  double& at(int u, int v) { return depths[static_cast<size_t>(v) * width + u]; }
  double at(int u, int v) const { return depths[static_cast<size_t>(v) * width + u]; }
};

// Netpbm I/O. Color is 8-bit binary P6; depth is 16-bit binary P5 with
// big-endian samples (Netpbm convention), storing round(depth * depth_scale).
void write_ppm(const std::string& path, const ColorImage& img);
ColorImage read_ppm(const std::string& path);
void write_pgm16(const std::string& path, const DepthImage& img, double depth_scale);
DepthImage read_pgm16(const std::string& path, double depth_scale);

}  // namespace trislam
