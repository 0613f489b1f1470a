// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiavox/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace tiavox {
namespace {

struct AxisWeights {
  int i0 = 0;
  int i1 = 0;
  double f = 0.0;  // weight of i1
};

AxisWeights axis_weights(int n, double lo, double hi, double coord) {
  AxisWeights a;
  if (n == 1) return a;
  double u = (coord - lo) / (hi - lo) * n - 0.5;
  u = std::clamp(u, 0.0, static_cast<double>(n - 1));
  int i0 = static_cast<int>(std::floor(u));
  if (i0 > n - 2) i0 = n - 2;
  a.i0 = i0;
  a.i1 = i0 + 1;
  a.f = u - i0;
  return a;
}

}  // namespace

void GridDims::validate() const {
  if (n_t < 1 || n_h < 1 || n_w < 1 || n_d < 1)
    throw std::invalid_argument("grid dims must all be at least 1");
}

double softplus_inverse(double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("softplus inverse needs a positive density");
  if (sigma > 30.0) return sigma;
  return std::log(std::expm1(sigma));
}

Grid4D::Grid4D(GridDims dims, SceneBounds bounds, double activation_bias, std::vector<double> raw)
    : dims_(dims), bounds_(bounds), activation_bias_(activation_bias), raw_(std::move(raw)) {
  dims_.validate();
  bounds_.validate();
  if (raw_.size() != dims_.total_count())
    throw std::invalid_argument("grid raw length " + std::to_string(raw_.size()) +
                                " does not match dims product " + std::to_string(dims_.total_count()));
}

Vec3 Grid4D::pitch() const {
  const Vec3 e = bounds_.extent();
  return {e.x / dims_.n_h, e.y / dims_.n_w, e.z / dims_.n_d};
}

double Grid4D::min_pitch() const {
  const Vec3 p = pitch();
  return std::min({p.x, p.y, p.z});
}

Vec3 Grid4D::voxel_center(int h, int w, int d) const {
  const Vec3 p = pitch();
  return bounds_.min_corner + Vec3{(h + 0.5) * p.x, (w + 0.5) * p.y, (d + 0.5) * p.z};
}

Grid4D init_grid(GridDims dims, const SceneBounds& bounds, double sigma_init) {
  if (!(sigma_init > 0.0)) throw std::invalid_argument("sigma_init must be positive");
  dims.validate();
  return Grid4D(dims, bounds, softplus_inverse(sigma_init), std::vector<double>(dims.total_count(), 0.0));
}

SpatialStencil spatial_stencil(const GridDims& dims, const SceneBounds& bounds, const Vec3& x) {
  SpatialStencil s;
  if (!bounds.contains(x)) return s;
  s.inside = true;
  const AxisWeights ax = axis_weights(dims.n_h, bounds.min_corner.x, bounds.max_corner.x, x.x);
  const AxisWeights ay = axis_weights(dims.n_w, bounds.min_corner.y, bounds.max_corner.y, x.y);
  const AxisWeights az = axis_weights(dims.n_d, bounds.min_corner.z, bounds.max_corner.z, x.z);
  const std::size_t nw = dims.n_w;
  const std::size_t nd = dims.n_d;
  int c = 0;
  for (int bh = 0; bh < 2; ++bh) {
    const std::size_t h = bh ? ax.i1 : ax.i0;
    const double wh = bh ? ax.f : 1.0 - ax.f;
    for (int bw = 0; bw < 2; ++bw) {
      const std::size_t w = bw ? ay.i1 : ay.i0;
      const double ww = bw ? ay.f : 1.0 - ay.f;
      for (int bd = 0; bd < 2; ++bd) {
        const std::size_t d = bd ? az.i1 : az.i0;
        const double wd = bd ? az.f : 1.0 - az.f;
        s.offset[c] = (h * nw + w) * nd + d;
        s.weight[c] = wh * ww * wd;
        ++c;
      }
    }
  }
  return s;
}

TemporalStencil temporal_stencil(int n_t, double t) {
  TemporalStencil s;
  if (n_t <= 1) return s;
  const double u = std::clamp(t, 0.0, 1.0) * (n_t - 1);
  int k0 = static_cast<int>(std::floor(u));
  if (k0 > n_t - 2) k0 = n_t - 2;
  s.k0 = k0;
  s.k1 = k0 + 1;
  s.w1 = u - k0;
  s.w0 = 1.0 - s.w1;
  return s;
}

std::vector<double> sample_spatial(const Vec3& x, const Grid4D& grid) {
  const GridDims& dims = grid.dims();
  std::vector<double> out(dims.n_t, 0.0);
  const SpatialStencil s = spatial_stencil(dims, grid.bounds(), x);
  if (!s.inside) return out;
  const auto raw = grid.raw();
  const std::size_t slice = dims.spatial_count();
  for (int t = 0; t < dims.n_t; ++t) {
    double acc = 0.0;
    for (int c = 0; c < 8; ++c) acc += s.weight[c] * raw[t * slice + s.offset[c]];
    out[t] = acc;
  }
  return out;
}

double sample_temporal(double t, std::span<const double> per_time_values) {
  if (per_time_values.empty()) throw std::invalid_argument("temporal sample needs at least one knot");
  const TemporalStencil s = temporal_stencil(static_cast<int>(per_time_values.size()), t);
  if (s.w1 == 0.0) return per_time_values[s.k0];
  return s.w0 * per_time_values[s.k0] + s.w1 * per_time_values[s.k1];
}

DensityQuery query_density(const Vec3& x, double t, const Grid4D& grid) {
  DensityQuery q;
  const GridDims& dims = grid.dims();
  const SpatialStencil s = spatial_stencil(dims, grid.bounds(), x);
  if (!s.inside) {
    q.sigma = grid.activate(0.0);
    return q;
  }
  const TemporalStencil ts = temporal_stencil(dims.n_t, t);
  const std::size_t slice = dims.spatial_count();
  const auto raw = grid.raw();
  const int knots = dims.n_t > 1 ? 2 : 1;
  for (int k = 0; k < knots; ++k) {
    const std::size_t base = static_cast<std::size_t>(k == 0 ? ts.k0 : ts.k1) * slice;
    const double wt = k == 0 ? ts.w0 : ts.w1;
    for (int c = 0; c < 8; ++c) {
      q.index[q.count] = base + s.offset[c];
      q.weight[q.count] = wt * s.weight[c];
      q.pre_activation += q.weight[q.count] * raw[q.index[q.count]];
      ++q.count;
    }
  }
  q.sigma = grid.activate(q.pre_activation);
  return q;
}

std::vector<double> upscale_temporal_field(std::span<const double> field, const GridDims& dims) {
  if (dims.n_t < 2) throw std::invalid_argument("temporal upscale needs at least two time knots");
  const std::size_t slice = dims.spatial_count();
  const int nt_new = 2 * dims.n_t - 1;
  std::vector<double> out(static_cast<std::size_t>(nt_new) * slice);
  for (int k = 0; k < dims.n_t; ++k) {
    std::copy_n(field.begin() + k * slice, slice, out.begin() + 2 * k * slice);
    if (k + 1 < dims.n_t) {
      const double* a = field.data() + k * slice;
      const double* b = field.data() + (k + 1) * slice;
      double* m = out.data() + (2 * k + 1) * slice;
      for (std::size_t i = 0; i < slice; ++i) m[i] = 0.5 * (a[i] + b[i]);
    }
  }
  return out;
}

Grid4D upscale_temporal(const Grid4D& grid) {
  GridDims dims = grid.dims();
  std::vector<double> raw = upscale_temporal_field(grid.raw(), dims);
  dims.n_t = 2 * dims.n_t - 1;
  return Grid4D(dims, grid.bounds(), grid.activation_bias(), std::move(raw));
}

std::vector<double> resample_spatial_field(std::span<const double> field, const GridDims& dims,
                                           const SceneBounds& bounds, int n_h, int n_w, int n_d) {
  if (n_h < dims.n_h || n_w < dims.n_w || n_d < dims.n_d)
    throw std::invalid_argument("spatial upscale cannot shrink the grid");
  const GridDims target{dims.n_t, n_h, n_w, n_d};
  const std::size_t old_slice = dims.spatial_count();
  const std::size_t new_slice = target.spatial_count();
  std::vector<double> out(target.total_count());
  const Vec3 e = bounds.extent();
  const Vec3 p{e.x / n_h, e.y / n_w, e.z / n_d};
  for (int h = 0; h < n_h; ++h) {
    for (int w = 0; w < n_w; ++w) {
      for (int d = 0; d < n_d; ++d) {
        const Vec3 x = bounds.min_corner + Vec3{(h + 0.5) * p.x, (w + 0.5) * p.y, (d + 0.5) * p.z};
        const SpatialStencil s = spatial_stencil(dims, bounds, x);
        const std::size_t o = (static_cast<std::size_t>(h) * n_w + w) * n_d + d;
        for (int t = 0; t < dims.n_t; ++t) {
          double acc = 0.0;
          for (int c = 0; c < 8; ++c) acc += s.weight[c] * field[t * old_slice + s.offset[c]];
          out[t * new_slice + o] = acc;
        }
      }
    }
  }
  return out;
}

Grid4D upscale_spatial(const Grid4D& grid, int n_h, int n_w, int n_d) {
  const GridDims& dims = grid.dims();
  if (n_h == dims.n_h && n_w == dims.n_w && n_d == dims.n_d) return grid;
  std::vector<double> raw = resample_spatial_field(grid.raw(), dims, grid.bounds(), n_h, n_w, n_d);
  return Grid4D({dims.n_t, n_h, n_w, n_d}, grid.bounds(), grid.activation_bias(), std::move(raw));
}

bool OccupancyMask::occupied_at(const Vec3& x) const {
  if (occupied.empty() || !bounds.contains(x)) return false;
  const Vec3 e = bounds.extent();
  const int h = std::min(n_h - 1, static_cast<int>((x.x - bounds.min_corner.x) / e.x * n_h));
  const int w = std::min(n_w - 1, static_cast<int>((x.y - bounds.min_corner.y) / e.y * n_w));
  const int d = std::min(n_d - 1, static_cast<int>((x.z - bounds.min_corner.z) / e.z * n_d));
  return at(h, w, d);
}

std::size_t OccupancyMask::occupied_count() const {
  return static_cast<std::size_t>(std::count(occupied.begin(), occupied.end(), std::uint8_t{1}));
}

OccupancyMask refresh_occupancy(const Grid4D& grid, double threshold, int dilation) {
  if (!(threshold > 0.0)) throw std::invalid_argument("occupancy threshold must be positive");
  if (dilation < 0) throw std::invalid_argument("occupancy dilation must be non-negative");
  const GridDims& dims = grid.dims();
  const std::size_t slice = dims.spatial_count();
  const auto raw = grid.raw();

  std::vector<std::uint8_t> seed(slice, 0);
  for (std::size_t i = 0; i < slice; ++i) {
    double peak = 0.0;
    for (int t = 0; t < dims.n_t; ++t) peak = std::max(peak, grid.activate(raw[t * slice + i]));
    seed[i] = peak >= threshold ? 1 : 0;
  }

  OccupancyMask mask;
  mask.n_h = dims.n_h;
  mask.n_w = dims.n_w;
  mask.n_d = dims.n_d;
  mask.bounds = grid.bounds();
  mask.occupied.assign(slice, 0);
  // Separable box dilation, one axis at a time.
  auto dilate_axis = [&](std::vector<std::uint8_t>& src, int axis) {
    std::vector<std::uint8_t> dst(slice, 0);
    const int n[3] = {dims.n_h, dims.n_w, dims.n_d};
    for (int h = 0; h < n[0]; ++h)
      for (int w = 0; w < n[1]; ++w)
        for (int d = 0; d < n[2]; ++d) {
          if (!src[(static_cast<std::size_t>(h) * n[1] + w) * n[2] + d]) continue;
          int c[3] = {h, w, d};
          const int lo = std::max(0, c[axis] - dilation);
          const int hi = std::min(n[axis] - 1, c[axis] + dilation);
          for (int v = lo; v <= hi; ++v) {
            c[axis] = v;
            dst[(static_cast<std::size_t>(c[0]) * n[1] + c[1]) * n[2] + c[2]] = 1;
          }
        }
    src.swap(dst);
  };
  if (dilation > 0)
    for (int axis = 0; axis < 3; ++axis) dilate_axis(seed, axis);
  mask.occupied = std::move(seed);
  return mask;
}

}  // namespace tiavox
