// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

// The time-aware attenuation grid: raw pre-activation values on an
// n_t x n_h x n_w x n_d lattice, queried by trilinear interpolation in space
// followed by linear interpolation in time, then a softplus activation.
//
// Lattice conventions:
//   * h, w, d index the world x, y, z axes respectively.
//   * Site i along an axis spanning [lo, hi] with n sites sits at
//     lo + (i + 0.5) * (hi - lo) / n (cell-centered).
//   * Time knot k of n_t sits at k / (n_t - 1); a single knot covers all t.
//   * Flattened index = ((t * n_h + h) * n_w + w) * n_d + d.

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tiavox/geometry.hpp"

namespace tiavox {

struct GridDims {
  int n_t = 1;
  int n_h = 1;
  int n_w = 1;
  int n_d = 1;

  std::size_t spatial_count() const {
    return static_cast<std::size_t>(n_h) * static_cast<std::size_t>(n_w) * static_cast<std::size_t>(n_d);
  }
  std::size_t total_count() const { return static_cast<std::size_t>(n_t) * spatial_count(); }
  int spatial(int axis) const { return axis == 0 ? n_h : (axis == 1 ? n_w : n_d); }
  void validate() const;
  bool operator==(const GridDims&) const = default;
};

inline constexpr double kDefaultSigmaInit = 1e-4;

// ln(1 + e^z), switching to the identity above z = 30.
inline double softplus(double z) {
  if (z > 30.0) return z;
  return std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Inverse of softplus for positive densities.
double softplus_inverse(double sigma);

class Grid4D {
 public:
  Grid4D() = default;
  Grid4D(GridDims dims, SceneBounds bounds, double activation_bias, std::vector<double> raw);

  const GridDims& dims() const { return dims_; }
  const SceneBounds& bounds() const { return bounds_; }
  double activation_bias() const { return activation_bias_; }

  std::span<double> raw() { return raw_; }
  std::span<const double> raw() const { return raw_; }

  std::size_t index(int t, int h, int w, int d) const {
    return ((static_cast<std::size_t>(t) * dims_.n_h + h) * dims_.n_w + w) * dims_.n_d + d;
  }

  double activate(double raw_value) const { return softplus(raw_value + activation_bias_); }
  // d(activate)/d(raw).
  double activate_derivative(double raw_value) const { return sigmoid(raw_value + activation_bias_); }

  Vec3 pitch() const;
  double min_pitch() const;
  Vec3 voxel_center(int h, int w, int d) const;

 private:
  GridDims dims_;
  SceneBounds bounds_;
  double activation_bias_ = 0.0;
  std::vector<double> raw_;
};

// Raw values all zero; the activation bias is chosen so every voxel activates
// to sigma_init. Throws std::invalid_argument for sigma_init <= 0.
Grid4D init_grid(GridDims dims, const SceneBounds& bounds, double sigma_init = kDefaultSigmaInit);

// The eight lattice corners around a spatial query. Offsets index one time
// slice (h * n_w + w) * n_d + d. Coordinates beyond the outermost centers are
// clamped to the border sites.
struct SpatialStencil {
  std::array<std::size_t, 8> offset{};
  std::array<double, 8> weight{};
  bool inside = false;
};

SpatialStencil spatial_stencil(const GridDims& dims, const SceneBounds& bounds, const Vec3& x);

struct TemporalStencil {
  int k0 = 0;
  int k1 = 0;
  double w0 = 1.0;
  double w1 = 0.0;
};

// t is clamped to [0, 1].
TemporalStencil temporal_stencil(int n_t, double t);

// Trilinear interpolation at x, one value per time knot. Queries outside the
// bounds return the initialization pre-activation (zeros).
std::vector<double> sample_spatial(const Vec3& x, const Grid4D& grid);

double sample_temporal(double t, std::span<const double> per_time_values);

struct DensityQuery {
  double sigma = 0.0;
  double pre_activation = 0.0;  // interpolated raw value, before the bias
  int count = 0;                // contributing entries; 0 outside the bounds
  std::array<std::size_t, 16> index{};
  std::array<double, 16> weight{};
};

DensityQuery query_density(const Vec3& x, double t, const Grid4D& grid);

// n_t -> 2 n_t - 1 by midpoint insertion. Rejects n_t == 1.
Grid4D upscale_temporal(const Grid4D& grid);

// Trilinear resample to larger spatial dims; bounds unchanged. Rejects shrinking.
Grid4D upscale_spatial(const Grid4D& grid, int n_h, int n_w, int n_d);

// The same resampling rules for any per-entry field laid out like the grid
// (used for optimizer moments).
std::vector<double> upscale_temporal_field(std::span<const double> field, const GridDims& dims);
std::vector<double> resample_spatial_field(std::span<const double> field, const GridDims& dims,
                                           const SceneBounds& bounds, int n_h, int n_w, int n_d);

struct OccupancyMask {
  int n_h = 0;
  int n_w = 0;
  int n_d = 0;
  SceneBounds bounds;
  std::vector<std::uint8_t> occupied;
  int refresh_interval = 1000;

  bool empty() const { return occupied.empty(); }
  bool at(int h, int w, int d) const {
    return occupied[(static_cast<std::size_t>(h) * n_w + w) * n_d + d] != 0;
  }
  // Whether the voxel containing x is occupied; points outside count as empty.
  bool occupied_at(const Vec3& x) const;
  std::size_t occupied_count() const;
};

// Occupied iff the max over time knots of the activated density reaches the
// threshold, then box-dilated by `dilation` voxels. Rejects threshold <= 0.
OccupancyMask refresh_occupancy(const Grid4D& grid, double threshold = 1e-3, int dilation = 1);

}  // namespace tiavox
