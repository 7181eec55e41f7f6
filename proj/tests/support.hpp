#pragma once

// Shared fixtures and independent reference computations for the test suites.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "roadfuse/geometry.hpp"

namespace testsupport {

using roadfuse::Vec2;
using roadfuse::Vec3;

inline std::filesystem::path data_dir() { return ROADFUSE_DATA_DIR; }

inline std::filesystem::path default_scenario() { return data_dir() / "default_scenario.json"; }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("roadfuse_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// 1920x1080 camera with fx = fy = 1000 and the principal point at the image center.
inline roadfuse::CameraModel standard_camera(const Vec3& position, double yaw, double pitch) {
  return roadfuse::CameraModel::mounted(1000.0, 1000.0, 960.0, 540.0, 1920, 1080, position, yaw,
                                        pitch);
}

/// Point-in-oriented-rectangle test in the rectangle's own frame.
inline bool in_rect(const Vec2& p, const Vec2& c, double length, double width, double yaw) {
  const Vec2 d = p - c;
  const double x = std::cos(yaw) * d.x() + std::sin(yaw) * d.y();
  const double y = -std::sin(yaw) * d.x() + std::cos(yaw) * d.y();
  return std::abs(x) <= 0.5 * length && std::abs(y) <= 0.5 * width;
}

struct Rect {
  Vec2 c;
  double length;
  double width;
  double yaw;
};

/// BEV IOU by stratified sampling on an n x n grid over the joint bounding square.
inline double sampled_bev_iou(const Rect& a, const Rect& b, int n) {
  const double ra = 0.5 * std::hypot(a.length, a.width);
  const double rb = 0.5 * std::hypot(b.length, b.width);
  const double x0 = std::min(a.c.x() - ra, b.c.x() - rb);
  const double x1 = std::max(a.c.x() + ra, b.c.x() + rb);
  const double y0 = std::min(a.c.y() - ra, b.c.y() - rb);
  const double y1 = std::max(a.c.y() + ra, b.c.y() + rb);
  long inter = 0;
  long uni = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vec2 p(x0 + (i + 0.5) * (x1 - x0) / n, y0 + (j + 0.5) * (y1 - y0) / n);
      const bool ia = in_rect(p, a.c, a.length, a.width, a.yaw);
      const bool ib = in_rect(p, b.c, b.length, b.width, b.yaw);
      inter += ia && ib;
      uni += ia || ib;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Axis-aligned IOU by rasterizing both boxes at `step` pixel resolution.
inline double raster_iou(double a0, double b0, double a1, double b1, double c0, double d0,
                         double c1, double d1, double step) {
  const double u0 = std::min(a0, c0), u1 = std::max(a1, c1);
  const double v0 = std::min(b0, d0), v1 = std::max(b1, d1);
  long inter = 0, uni = 0;
  for (double u = u0 + 0.5 * step; u < u1; u += step) {
    for (double v = v0 + 0.5 * step; v < v1; v += step) {
      const bool ia = u >= a0 && u <= a1 && v >= b0 && v <= b1;
      const bool ib = u >= c0 && u <= c1 && v >= d0 && v <= d1;
      inter += ia && ib;
      uni += ia || ib;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace testsupport
