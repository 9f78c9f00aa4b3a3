#include "trislam/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace trislam {

namespace {

std::uint8_t to_u8(double c) {
  const double clamped = std::clamp(c, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(clamped * 255.0));
}

// Reads one whitespace-delimited token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  while (in >> tok) {
    if (tok[0] == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    return tok;
  }
  throw std::runtime_error("netpbm: truncated header");
}

}  // namespace

void write_ppm(const std::string& path, const ColorImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<size_t>(img.width) * 3);
  for (int v = 0; v < img.height; ++v) {
    for (int u = 0; u < img.width; ++u) {
      const Vec3& c = img.at(u, v);
      row[3 * u + 0] = to_u8(c.x());
      row[3 * u + 1] = to_u8(c.y());
      row[3 * u + 2] = to_u8(c.z());
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

ColorImage read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image: " + path);
  if (next_token(in) != "P6") throw std::runtime_error("not a P6 ppm: " + path);
  const int w = std::stoi(next_token(in));
  const int h = std::stoi(next_token(in));
  const int maxval = std::stoi(next_token(in));
  if (maxval != 255) throw std::runtime_error("unsupported ppm maxval in " + path);
  in.get();  // single whitespace after maxval
  ColorImage img(w, h);
  std::vector<std::uint8_t> row(static_cast<size_t>(w) * 3);
  for (int v = 0; v < h; ++v) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!in) throw std::runtime_error("truncated ppm: " + path);
    for (int u = 0; u < w; ++u)
      img.at(u, v) = Vec3(row[3 * u] / 255.0, row[3 * u + 1] / 255.0, row[3 * u + 2] / 255.0);
  }
  return img;
}

void write_pgm16(const std::string& path, const DepthImage& img, double depth_scale) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  out << "P5\n" << img.width << " " << img.height << "\n65535\n";
  std::vector<std::uint8_t> row(static_cast<size_t>(img.width) * 2);
  for (int v = 0; v < img.height; ++v) {
    for (int u = 0; u < img.width; ++u) {
      const double d = img.at(u, v);
      const long value = std::clamp(std::lround(d * depth_scale), 0L, 65535L);
      row[2 * u + 0] = static_cast<std::uint8_t>((value >> 8) & 0xff);
      row[2 * u + 1] = static_cast<std::uint8_t>(value & 0xff);
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

DepthImage read_pgm16(const std::string& path, double depth_scale) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image: " + path);
  if (next_token(in) != "P5") throw std::runtime_error("not a P5 pgm: " + path);
  const int w = std::stoi(next_token(in));
  const int h = std::stoi(next_token(in));
  const int maxval = std::stoi(next_token(in));
  if (maxval != 65535) throw std::runtime_error("expected 16-bit pgm in " + path);
  in.get();
  DepthImage img(w, h);
  std::vector<std::uint8_t> row(static_cast<size_t>(w) * 2);
  for (int v = 0; v < h; ++v) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!in) throw std::runtime_error("truncated pgm: " + path);
    for (int u = 0; u < w; ++u) {
      const int value = (row[2 * u] << 8) | row[2 * u + 1];
      img.at(u, v) = value / depth_scale;
    }
  }
  return img;
}

}  // namespace trislam
