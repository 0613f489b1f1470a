// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

// Analytic dynamic vessel phantom and an exact forward projector for it.
// Nothing here touches Grid4D: projections of the phantom are computed from
// ray/capsule intersections, not from a voxelization.

#pragma once

#include <cstdint>
#include <vector>

#include "tiavox/geometry.hpp"
#include "tiavox/image.hpp"
#include "tiavox/renderer.hpp"

namespace tiavox {

// A capsule-shaped vessel that fills with contrast over
// [arrival_time, arrival_time + fill_duration].
struct VesselSegment {
  Vec3 a;
  Vec3 b;
  double radius_mm = 1.0;
  double sigma_max = 0.05;  // 1/mm
  double arrival_time = 0.0;
  double fill_duration = 0.0;  // 0 gives an instantaneous fill

  // Density at time t: sigma_max times the fill ramp.
  double fill(double t) const;
  bool contains(const Vec3& x) const;
};

struct PhantomField {
  std::vector<VesselSegment> segments;
  double background = 0.0;

  void validate() const;
};

struct NoiseModel {
  double gaussian_std_fraction = 0.02;
  std::uint64_t seed = 0;
};

// Clamped smooth-step 3u^2 - 2u^3.
double smoothstep_ramp(double u);

double phantom_density(const Vec3& x, double t, const PhantomField& field);

// Trunk plus two generations of branches inside [-50, 50]^3 mm, peak density
// 0.05/mm, contrast arriving later further from the inlet. Static mode fills
// every vessel at t = 0.
PhantomField default_phantom(bool static_mode = false);
SceneBounds default_phantom_bounds();

// Parameter interval [enter, exit] of a ray inside a capsule, if any.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};
bool ray_capsule_interval(const Vec3& origin, const Vec3& direction, const VesselSegment& seg, Interval& out);

// Exact line integral along origin + s * direction, s >= 0. The background
// density only counts inside `bounds`.
double phantom_line_integral(const Vec3& origin, const Vec3& direction, double t, const PhantomField& field,
                             const SceneBounds& bounds);

// Midpoint quadrature of phantom_density over the ray's chord through bounds;
// a cross-check for the exact integrator.
double phantom_line_integral_quadrature(const Ray& ray, double t, const PhantomField& field, double step);

// Detector image of the phantom through the same pixel model as the renderer.
Projection project_phantom(const PhantomField& field, const ViewPose& pose, const RenderConfig& config,
                           const SceneBounds& bounds);

// i.i.d. Gaussian noise with std = fraction * max(image), clamped to [0, 1].
Image add_noise(const Image& image, const NoiseModel& model);

// phantom_density at voxel centers for every requested time.
Volume rasterize_ground_truth(const PhantomField& field, int n_h, int n_w, int n_d, const SceneBounds& bounds,
                              const std::vector<double>& times);

// A monocular rotational acquisition: angle and time advance together, view
// j of M sitting at fraction j / (M - 1) of the arc and of the time axis.
// Held-out views sit at fractions (k + 0.5) / H along the same trajectory.
struct AcquisitionConfig {
  int views = 30;
  int holdout = 10;
  double start_angle_deg = 0.0;
  double arc_deg = 180.0;
  double secondary_angle_deg = 0.0;
  double sdd_mm = 800.0;
  double sod_mm = 400.0;
  double pixel_spacing_mm = 2.0;
  int rows = 128;
  int cols = 128;
  NoiseModel noise;
};

struct Acquisition {
  std::vector<Projection> training;  // noisy
  std::vector<Projection> heldout;   // noise-free
};

ViewPose trajectory_pose(const AcquisitionConfig& config, double fraction);

Acquisition simulate_acquisition(const PhantomField& field, const SceneBounds& bounds,
                                 const AcquisitionConfig& config, const RenderConfig& render = {});

}  // namespace tiavox
