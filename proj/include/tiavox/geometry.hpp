// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

// C-arm style acquisition geometry: pose parameters to a cone-beam camera,
// and source-to-pixel rays clipped against the scene box.
//
// World frame: the isocenter is the origin. With both angles at zero the
// source sits at (0, -sod, 0) and looks along +y; detector columns run along
// +x and the detector "up" direction is +z, with row 0 at the top.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "tiavox/vec3.hpp"

namespace tiavox {

struct ViewPose {
  double primary_angle_deg = 0.0;    // about world +z
  double secondary_angle_deg = 0.0;  // about the rig's rotated +x, applied after primary
  double sdd_mm = 1000.0;
  double sod_mm = 500.0;
  double pixel_spacing_mm = 1.0;
  int rows = 1;
  int cols = 1;
  double time = 0.0;

  // Throws std::invalid_argument naming the violated constraint.
  void validate() const;
};

struct SceneBounds {
  Vec3 min_corner{-1.0, -1.0, -1.0};
  Vec3 max_corner{1.0, 1.0, 1.0};

  Vec3 extent() const { return max_corner - min_corner; }
  bool contains(const Vec3& p) const;
  void validate() const;
};

// Source position and detector frame for one view.
struct Camera {
  Vec3 source;
  Vec3 detector_center;
  Vec3 normal;      // unit, source -> detector
  Vec3 col_axis;    // unit, increasing column index
  Vec3 row_axis;    // unit, detector "up"; row index grows against it
  double pixel_spacing_mm = 1.0;
  int rows = 1;
  int cols = 1;

  // Physical center of detector pixel (row, col).
  Vec3 pixel_center(int row, int col) const;
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
  double t_near = 0.0;
  double t_far = 0.0;
  bool hit = false;

  Vec3 at(double t) const { return origin + direction * t; }
  double chord() const { return hit ? t_far - t_near : 0.0; }
};

struct PixelIndex {
  int row = 0;
  int col = 0;
  bool operator==(const PixelIndex&) const = default;
};

struct PixelRay {
  Ray ray;
  PixelIndex pixel;
};

Camera pose_to_camera(const ViewPose& pose);

// Slab test of the half-line origin + t*direction (t >= 0) against the box.
// Rays that start inside the box get t_near = 0.
Ray intersect_bounds(const Vec3& origin, const Vec3& direction, const SceneBounds& bounds);

Ray pixel_ray(const Camera& camera, const SceneBounds& bounds, PixelIndex pixel);

// One ray per requested pixel, or per detector pixel in row-major order when
// no subset is given. Out-of-range indices throw std::out_of_range.
std::vector<PixelRay> generate_rays(const ViewPose& pose, const SceneBounds& bounds,
                                    std::optional<std::span<const PixelIndex>> pixel_subset = {});

// Uniform normalized acquisition times: view j of M gets j / (M - 1).
std::vector<double> assign_view_times(int view_count);

}  // namespace tiavox
