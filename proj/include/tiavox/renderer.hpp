// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

// Differentiable ray marching through a Grid4D.
//
// Samples sit at regular spacing along the clipped chord; each contributes
// sigma_i * delta_i to the line integral L. The pixel is either the absorbed
// fraction 1 - exp(-L) (scaled by i0) or L itself.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tiavox/geometry.hpp"
#include "tiavox/grid.hpp"
#include "tiavox/image.hpp"

namespace tiavox {

enum class PixelModel { absorbance, line_integral };

const char* to_string(PixelModel model);
PixelModel pixel_model_from_string(const std::string& name);

struct RenderConfig {
  double step_size_mm = 0.0;  // <= 0 means half the grid's smallest voxel pitch
  PixelModel pixel_model = PixelModel::absorbance;
  double i0 = 1.0;

  void validate() const;
  double resolve_step(const Grid4D& grid) const {
    return step_size_mm > 0.0 ? step_size_mm : 0.5 * grid.min_pitch();
  }
};

struct RaySamples {
  std::vector<Vec3> points;
  std::vector<double> delta;
  std::vector<std::uint8_t> skipped;

  std::size_t size() const { return points.size(); }
};

// Number of segments and the truncated length of the last one for a chord.
struct MarchPlan {
  int count = 0;
  double step = 0.0;
  double last = 0.0;

  double delta(int k) const { return k + 1 < count ? step : last; }
  // Distance from t_near to the midpoint of segment k.
  double offset(int k) const { return k * step + 0.5 * delta(k); }
};

MarchPlan plan_march(double chord, double step);

// Misses produce an empty list. Points inside mask-empty voxels are flagged
// skipped. Throws std::invalid_argument for step <= 0.
RaySamples sample_ray(const Ray& ray, double step, const OccupancyMask* mask = nullptr);

struct GradientEntry {
  std::size_t index = 0;
  double value = 0.0;
};

struct PixelResult {
  double value = 0.0;
  double line_integral = 0.0;
  // dP/draw per contributing raw entry; an index may repeat.
  std::vector<GradientEntry> gradient;
};

PixelResult render_pixel(const RaySamples& samples, const Grid4D& grid, double t, const RenderConfig& config,
                         bool with_gradient = true);

double pixel_from_line_integral(double line_integral, const RenderConfig& config);

// Forward-only march of one ray, without materializing samples.
double trace_ray(const Ray& ray, const Grid4D& grid, double t, const RenderConfig& config, double step,
                 const OccupancyMask* mask = nullptr);

// Forward march, then adds upstream(P) * dP/draw_j into gradient[j] for every
// contributing entry. Returns P. `upstream` maps the pixel value to dLoss/dP.
template <class Upstream, class Sink>
double trace_ray_backward(const Ray& ray, const Grid4D& grid, double t, const RenderConfig& config, double step,
                          const OccupancyMask* mask, Upstream&& upstream, Sink&& sink);

// Full detector image at the pose's time (clamped to [0, 1]). OpenMP across
// rows; the serial variant is the reference for tests and benchmarks.
Projection render_view(const ViewPose& pose, const Grid4D& grid, const RenderConfig& config,
                       const OccupancyMask* mask = nullptr);
Projection render_view_serial(const ViewPose& pose, const Grid4D& grid, const RenderConfig& config,
                              const OccupancyMask* mask = nullptr);

// Activated densities at the voxel centers of an h x w x d lattice over the
// grid bounds, at time t.
Volume export_volume(const Grid4D& grid, double t, int n_h, int n_w, int n_d);

}  // namespace tiavox

#include "tiavox/renderer_inl.hpp"
