// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiavox/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tiavox {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// Rz(primary) * Rx(secondary) applied to a rig-local vector.
Vec3 rotate_rig(const Vec3& v, double primary_rad, double secondary_rad) {
  const double cs = std::cos(secondary_rad);
  const double ss = std::sin(secondary_rad);
  const Vec3 r1{v.x, v.y * cs - v.z * ss, v.y * ss + v.z * cs};
  const double cp = std::cos(primary_rad);
  const double sp = std::sin(primary_rad);
  return {r1.x * cp - r1.y * sp, r1.x * sp + r1.y * cp, r1.z};
}

}  // namespace

void ViewPose::validate() const {
  if (!(sod_mm > 0.0)) throw std::invalid_argument("pose: sod must be positive");
  if (!(sdd_mm > sod_mm)) throw std::invalid_argument("pose: sdd must exceed sod");
  if (!(pixel_spacing_mm > 0.0)) throw std::invalid_argument("pose: pixel spacing must be positive");
  if (rows < 1 || cols < 1) throw std::invalid_argument("pose: detector needs at least one row and column");
  if (!(time >= 0.0 && time <= 1.0)) throw std::invalid_argument("pose: time must lie in [0, 1]");
  if (!std::isfinite(primary_angle_deg) || !std::isfinite(secondary_angle_deg))
    throw std::invalid_argument("pose: angles must be finite");
}

bool SceneBounds::contains(const Vec3& p) const {
  return p.x >= min_corner.x && p.x <= max_corner.x && p.y >= min_corner.y && p.y <= max_corner.y &&
         p.z >= min_corner.z && p.z <= max_corner.z;
}

void SceneBounds::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (!(min_corner[a] < max_corner[a]))
      throw std::invalid_argument("bounds: min corner must be below max corner on every axis");
  }
}

Vec3 Camera::pixel_center(int row, int col) const {
  const double u = (col + 0.5 - 0.5 * cols) * pixel_spacing_mm;
  const double v = (0.5 * rows - row - 0.5) * pixel_spacing_mm;
  return detector_center + col_axis * u + row_axis * v;
}

Camera pose_to_camera(const ViewPose& pose) {
  const double p = pose.primary_angle_deg * kDegToRad;
  const double s = pose.secondary_angle_deg * kDegToRad;
  Camera cam;
  cam.normal = rotate_rig({0.0, 1.0, 0.0}, p, s);
  cam.col_axis = rotate_rig({1.0, 0.0, 0.0}, p, s);
  cam.row_axis = rotate_rig({0.0, 0.0, 1.0}, p, s);
  cam.source = cam.normal * -pose.sod_mm;
  cam.detector_center = cam.source + cam.normal * pose.sdd_mm;
  cam.pixel_spacing_mm = pose.pixel_spacing_mm;
  cam.rows = pose.rows;
  cam.cols = pose.cols;
  return cam;
}

Ray intersect_bounds(const Vec3& origin, const Vec3& direction, const SceneBounds& bounds) {
  Ray ray;
  ray.origin = origin;
  ray.direction = direction;
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double o = origin[a];
    const double d = direction[a];
    const double lo = bounds.min_corner[a];
    const double hi = bounds.max_corner[a];
    if (d == 0.0) {
      if (o < lo || o > hi) return ray;
      continue;
    }
    double ta = (lo - o) / d;
    double tb = (hi - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return ray;
  }
  ray.t_near = t0;
  ray.t_far = t1;
  ray.hit = true;
  return ray;
}

Ray pixel_ray(const Camera& camera, const SceneBounds& bounds, PixelIndex pixel) {
  const Vec3 target = camera.pixel_center(pixel.row, pixel.col);
  return intersect_bounds(camera.source, normalized(target - camera.source), bounds);
}

std::vector<PixelRay> generate_rays(const ViewPose& pose, const SceneBounds& bounds,
                                    std::optional<std::span<const PixelIndex>> pixel_subset) {
  pose.validate();
  const Camera cam = pose_to_camera(pose);
  std::vector<PixelRay> out;
  if (pixel_subset) {
    out.reserve(pixel_subset->size());
    for (const PixelIndex& px : *pixel_subset) {
      if (px.row < 0 || px.row >= pose.rows || px.col < 0 || px.col >= pose.cols)
        throw std::out_of_range("pixel (" + std::to_string(px.row) + ", " + std::to_string(px.col) +
                                ") outside detector");
      out.push_back({pixel_ray(cam, bounds, px), px});
    }
    return out;
  }
  out.reserve(static_cast<std::size_t>(pose.rows) * pose.cols);
  for (int r = 0; r < pose.rows; ++r)
    for (int c = 0; c < pose.cols; ++c) out.push_back({pixel_ray(cam, bounds, {r, c}), {r, c}});
  return out;
}

std::vector<double> assign_view_times(int view_count) {
  if (view_count < 1) throw std::invalid_argument("view count must be at least 1");
  std::vector<double> times(view_count, 0.0);
  if (view_count == 1) return times;
  for (int j = 0; j < view_count; ++j) times[j] = static_cast<double>(j) / (view_count - 1);
  return times;
}

}  // namespace tiavox
