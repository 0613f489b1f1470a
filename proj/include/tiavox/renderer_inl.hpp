// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

namespace tiavox {

template <class Upstream, class Sink>
double trace_ray_backward(const Ray& ray, const Grid4D& grid, double t, const RenderConfig& config, double step,
                          const OccupancyMask* mask, Upstream&& upstream, Sink&& sink) {
  if (!ray.hit) return pixel_from_line_integral(0.0, config);
  const MarchPlan plan = plan_march(ray.chord(), step);
  const bool use_mask = mask != nullptr && !mask->empty();

  double line = 0.0;
  for (int k = 0; k < plan.count; ++k) {
    const Vec3 x = ray.at(ray.t_near + plan.offset(k));
    if (use_mask && !mask->occupied_at(x)) continue;
    line += query_density(x, t, grid).sigma * plan.delta(k);
  }
  const double value = pixel_from_line_integral(line, config);
  const double g = upstream(value);
  if (g == 0.0) return value;

  // dP/dsigma_i = delta_i * i0 * exp(-L) (absorbance) or delta_i.
  const double dp_dline =
      config.pixel_model == PixelModel::absorbance ? config.i0 * std::exp(-line) : 1.0;
  const double scale = g * dp_dline;
  for (int k = 0; k < plan.count; ++k) {
    const Vec3 x = ray.at(ray.t_near + plan.offset(k));
    if (use_mask && !mask->occupied_at(x)) continue;
    const DensityQuery q = query_density(x, t, grid);
    if (q.count == 0) continue;
    const double c = scale * plan.delta(k) * grid.activate_derivative(q.pre_activation);
    for (int j = 0; j < q.count; ++j) {
      if (q.weight[j] != 0.0) sink(q.index[j], c * q.weight[j]);
    }
  }
  return value;
}

}  // namespace tiavox
