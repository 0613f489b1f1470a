// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiavox/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tiavox {

const char* to_string(PixelModel model) {
  return model == PixelModel::absorbance ? "absorbance" : "line_integral";
}

PixelModel pixel_model_from_string(const std::string& name) {
  if (name == "absorbance") return PixelModel::absorbance;
  if (name == "line_integral") return PixelModel::line_integral;
  throw std::invalid_argument("unknown pixel model '" + name + "'");
}

void RenderConfig::validate() const {
  if (std::isnan(step_size_mm)) throw std::invalid_argument("render: step size is NaN");
  if (!(i0 > 0.0)) throw std::invalid_argument("render: i0 must be positive");
}

MarchPlan plan_march(double chord, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("march step must be positive");
  MarchPlan plan;
  plan.step = step;
  if (!(chord > 0.0)) return plan;
  // Tolerate rounding so an exact multiple of the step gives no sliver segment.
  plan.count = std::max(1, static_cast<int>(std::ceil(chord / step - 1e-9)));
  plan.last = chord - (plan.count - 1) * step;
  return plan;
}

RaySamples sample_ray(const Ray& ray, double step, const OccupancyMask* mask) {
  RaySamples out;
  if (!(step > 0.0)) throw std::invalid_argument("march step must be positive");
  if (!ray.hit) return out;
  const MarchPlan plan = plan_march(ray.chord(), step);
  out.points.reserve(plan.count);
  out.delta.reserve(plan.count);
  out.skipped.reserve(plan.count);
  const bool use_mask = mask != nullptr && !mask->empty();
  for (int k = 0; k < plan.count; ++k) {
    const Vec3 x = ray.at(ray.t_near + plan.offset(k));
    out.points.push_back(x);
    out.delta.push_back(plan.delta(k));
    out.skipped.push_back(use_mask && !mask->occupied_at(x) ? 1 : 0);
  }
  return out;
}

double pixel_from_line_integral(double line_integral, const RenderConfig& config) {
  if (config.pixel_model == PixelModel::line_integral) return line_integral;
  return config.i0 * -std::expm1(-line_integral);
}

PixelResult render_pixel(const RaySamples& samples, const Grid4D& grid, double t, const RenderConfig& config,
                         bool with_gradient) {
  PixelResult result;
  std::vector<DensityQuery> queries;
  queries.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples.skipped[i]) continue;
    queries.push_back(query_density(samples.points[i], t, grid));
    result.line_integral += queries.back().sigma * samples.delta[i];
  }
  result.value = pixel_from_line_integral(result.line_integral, config);
  if (!with_gradient) return result;

  const double dp_dline =
      config.pixel_model == PixelModel::absorbance ? config.i0 * std::exp(-result.line_integral) : 1.0;
  std::size_t qi = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples.skipped[i]) continue;
    const DensityQuery& q = queries[qi++];
    const double c = dp_dline * samples.delta[i] * grid.activate_derivative(q.pre_activation);
    for (int j = 0; j < q.count; ++j) result.gradient.push_back({q.index[j], c * q.weight[j]});
  }
  return result;
}

double trace_ray(const Ray& ray, const Grid4D& grid, double t, const RenderConfig& config, double step,
                 const OccupancyMask* mask) {
  return trace_ray_backward(ray, grid, t, config, step, mask, [](double) { return 0.0; },
                            [](std::size_t, double) {});
}

namespace {

Projection render_rows(const ViewPose& pose, const Grid4D& grid, const RenderConfig& config,
                       const OccupancyMask* mask, bool parallel) {
  config.validate();
  ViewPose clamped = pose;
  clamped.time = std::clamp(pose.time, 0.0, 1.0);
  clamped.validate();
  const Camera cam = pose_to_camera(clamped);
  const double step = config.resolve_step(grid);
  Projection out{clamped, Image(clamped.rows, clamped.cols)};
  const int rows = clamped.rows;
  const int cols = clamped.cols;
  const double t = clamped.time;
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const Ray ray = pixel_ray(cam, grid.bounds(), {r, c});
      out.image.at(r, c) = ray.hit ? trace_ray(ray, grid, t, config, step, mask) : 0.0;
    }
  }
  return out;
}

}  // namespace

Projection render_view(const ViewPose& pose, const Grid4D& grid, const RenderConfig& config,
                       const OccupancyMask* mask) {
  return render_rows(pose, grid, config, mask, true);
}

Projection render_view_serial(const ViewPose& pose, const Grid4D& grid, const RenderConfig& config,
                              const OccupancyMask* mask) {
  return render_rows(pose, grid, config, mask, false);
}

Volume export_volume(const Grid4D& grid, double t, int n_h, int n_w, int n_d) {
  if (n_h < 1 || n_w < 1 || n_d < 1) throw std::invalid_argument("export dims must all be at least 1");
  Volume vol;
  vol.dims = {1, n_h, n_w, n_d};
  vol.bounds = grid.bounds();
  vol.times = {std::clamp(t, 0.0, 1.0)};
  vol.data.assign(vol.dims.total_count(), 0.0);
  const Vec3 e = grid.bounds().extent();
  const Vec3 p{e.x / n_h, e.y / n_w, e.z / n_d};
#pragma omp parallel for
  for (int h = 0; h < n_h; ++h)
    for (int w = 0; w < n_w; ++w)
      for (int d = 0; d < n_d; ++d) {
        const Vec3 x = grid.bounds().min_corner + Vec3{(h + 0.5) * p.x, (w + 0.5) * p.y, (d + 0.5) * p.z};
        vol.data[vol.index(0, h, w, d)] = query_density(x, t, grid).sigma;
      }
  return vol;
}

}  // namespace tiavox
