// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiavox/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace tiavox {
namespace {

double distance_to_segment(const Vec3& x, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = dot(ab, ab);
  double s = len2 > 0.0 ? dot(x - a, ab) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return norm(x - (a + ab * s));
}

// Roots of a s^2 + b s + c <= 0, assuming a > 0.
bool quadratic_interval(double a, double b, double c, Interval& out) {
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return false;
  const double sq = std::sqrt(disc);
  // Stable form of the two roots.
  const double q = -0.5 * (b + std::copysign(sq, b));
  double r0 = q / a;
  double r1 = q != 0.0 ? c / q : -r0;
  if (r0 > r1) std::swap(r0, r1);
  out = {r0, r1};
  return true;
}

bool sphere_interval(const Vec3& o, const Vec3& d, const Vec3& center, double r, Interval& out) {
  const Vec3 w = o - center;
  return quadratic_interval(dot(d, d), 2.0 * dot(w, d), dot(w, w) - r * r, out);
}

}  // namespace

double smoothstep_ramp(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

double VesselSegment::fill(double t) const {
  if (fill_duration <= 0.0) return t >= arrival_time ? sigma_max : 0.0;
  return sigma_max * smoothstep_ramp((t - arrival_time) / fill_duration);
}

bool VesselSegment::contains(const Vec3& x) const { return distance_to_segment(x, a, b) <= radius_mm; }

void PhantomField::validate() const {
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const VesselSegment& s = segments[i];
    if (!(s.radius_mm > 0.0)) throw std::invalid_argument("phantom segment " + std::to_string(i) + ": radius must be positive");
    if (!(s.sigma_max >= 0.0)) throw std::invalid_argument("phantom segment " + std::to_string(i) + ": negative peak density");
    if (s.fill_duration < 0.0) throw std::invalid_argument("phantom segment " + std::to_string(i) + ": negative fill duration");
  }
  if (background < 0.0) throw std::invalid_argument("phantom: negative background density");
}

double phantom_density(const Vec3& x, double t, const PhantomField& field) {
  double sigma = field.background;
  for (const VesselSegment& s : field.segments) {
    if (s.contains(x)) sigma = std::max(sigma, s.fill(t));
  }
  return sigma;
}

SceneBounds default_phantom_bounds() { return {{-50.0, -50.0, -50.0}, {50.0, 50.0, 50.0}}; }

PhantomField default_phantom(bool static_mode) {
  constexpr double kPeak = 0.05;
  const Vec3 inlet{0.0, 0.0, -45.0};
  const Vec3 fork{0.0, 0.0, -5.0};
  const Vec3 left{-20.0, 8.0, 20.0};
  const Vec3 right{22.0, -6.0, 18.0};
  PhantomField field;
  field.segments = {
      {inlet, fork, 4.0, kPeak, 0.0, 0.25},
      {fork, left, 3.0, kPeak, 0.25, 0.25},
      {fork, right, 3.0, kPeak, 0.25, 0.25},
      {left, {-35.0, 20.0, 42.0}, 2.0, kPeak, 0.5, 0.25},
      {left, {-8.0, -10.0, 40.0}, 2.0, kPeak, 0.5, 0.25},
      {right, {38.0, 10.0, 38.0}, 2.0, kPeak, 0.5, 0.25},
      {right, {12.0, -25.0, 40.0}, 2.0, kPeak, 0.5, 0.25},
  };
  if (static_mode) {
    for (VesselSegment& s : field.segments) {
      s.arrival_time = 0.0;
      s.fill_duration = 0.0;
    }
  }
  return field;
}

bool ray_capsule_interval(const Vec3& origin, const Vec3& direction, const VesselSegment& seg, Interval& out) {
  const double r = seg.radius_mm;
  Interval best{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  bool any = false;
  auto merge = [&](const Interval& iv) {
    if (iv.lo > iv.hi) return;
    best.lo = std::min(best.lo, iv.lo);
    best.hi = std::max(best.hi, iv.hi);
    any = true;
  };

  Interval iv;
  if (sphere_interval(origin, direction, seg.a, r, iv)) merge(iv);
  if (sphere_interval(origin, direction, seg.b, r, iv)) merge(iv);

  const Vec3 axis = seg.b - seg.a;
  const double len = norm(axis);
  if (len > 0.0) {
    const Vec3 u = axis / len;
    const Vec3 w = origin - seg.a;
    const Vec3 d_perp = direction - u * dot(direction, u);
    const Vec3 w_perp = w - u * dot(w, u);
    const double a = dot(d_perp, d_perp);
    Interval radial;
    bool radial_ok = false;
    if (a > 1e-18) {
      radial_ok = quadratic_interval(a, 2.0 * dot(w_perp, d_perp), dot(w_perp, w_perp) - r * r, radial);
    } else if (dot(w_perp, w_perp) <= r * r) {
      radial = {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
      radial_ok = true;
    }
    if (radial_ok) {
      // Slab 0 <= (w + s d) . u <= len.
      const double du = dot(direction, u);
      const double wu = dot(w, u);
      Interval slab;
      bool slab_ok = true;
      if (std::abs(du) > 1e-18) {
        double s0 = -wu / du;
        double s1 = (len - wu) / du;
        if (s0 > s1) std::swap(s0, s1);
        slab = {s0, s1};
      } else if (wu >= 0.0 && wu <= len) {
        slab = {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
      } else {
        slab_ok = false;
      }
      if (slab_ok) merge({std::max(radial.lo, slab.lo), std::min(radial.hi, slab.hi)});
    }
  }
  if (!any) return false;
  out = best;
  return true;
}

double phantom_line_integral(const Vec3& origin, const Vec3& direction, double t, const PhantomField& field,
                             const SceneBounds& bounds) {
  struct Piece {
    Interval iv;
    double sigma;
  };
  std::vector<Piece> pieces;
  pieces.reserve(field.segments.size() + 1);
  for (const VesselSegment& seg : field.segments) {
    const double s = seg.fill(t);
    if (s <= 0.0) continue;
    Interval iv;
    if (!ray_capsule_interval(origin, direction, seg, iv)) continue;
    iv.lo = std::max(iv.lo, 0.0);
    if (iv.hi > iv.lo) pieces.push_back({iv, s});
  }
  if (field.background > 0.0) {
    const Ray clip = intersect_bounds(origin, direction, bounds);
    if (clip.hit) pieces.push_back({{clip.t_near, clip.t_far}, field.background});
  }
  if (pieces.empty()) return 0.0;

  // The density is piecewise constant along the ray: the max over the pieces
  // covering each elementary interval.
  std::vector<double> cuts;
  cuts.reserve(2 * pieces.size());
  for (const Piece& p : pieces) {
    cuts.push_back(p.iv.lo);
    cuts.push_back(p.iv.hi);
  }
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = cuts[i];
    const double hi = cuts[i + 1];
    if (hi <= lo) continue;
    const double mid = 0.5 * (lo + hi);
    double sigma = 0.0;
    for (const Piece& p : pieces)
      if (p.iv.lo <= mid && mid <= p.iv.hi) sigma = std::max(sigma, p.sigma);
    total += sigma * (hi - lo);
  }
  return total;
}

double phantom_line_integral_quadrature(const Ray& ray, double t, const PhantomField& field, double step) {
  if (!ray.hit) return 0.0;
  const MarchPlan plan = plan_march(ray.chord(), step);
  double total = 0.0;
  for (int k = 0; k < plan.count; ++k)
    total += phantom_density(ray.at(ray.t_near + plan.offset(k)), t, field) * plan.delta(k);
  return total;
}

Projection project_phantom(const PhantomField& field, const ViewPose& pose, const RenderConfig& config,
                           const SceneBounds& bounds) {
  field.validate();
  config.validate();
  ViewPose clamped = pose;
  clamped.time = std::clamp(pose.time, 0.0, 1.0);
  clamped.validate();
  const Camera cam = pose_to_camera(clamped);
  Projection out{clamped, Image(clamped.rows, clamped.cols)};
#pragma omp parallel for schedule(dynamic, 4)
  for (int r = 0; r < clamped.rows; ++r) {
    for (int c = 0; c < clamped.cols; ++c) {
      const Vec3 dir = normalized(cam.pixel_center(r, c) - cam.source);
      const double line = phantom_line_integral(cam.source, dir, clamped.time, field, bounds);
      out.image.at(r, c) = pixel_from_line_integral(line, config);
    }
  }
  return out;
}

Image add_noise(const Image& image, const NoiseModel& model) {
  if (model.gaussian_std_fraction < 0.0) throw std::invalid_argument("noise: negative std fraction");
  Image out = image;
  if (model.gaussian_std_fraction == 0.0 || image.data.empty()) return out;
  const double peak = *std::max_element(image.data.begin(), image.data.end());
  const double sd = model.gaussian_std_fraction * peak;
  if (!(sd > 0.0)) return out;
  std::mt19937_64 rng(model.seed);
  std::normal_distribution<double> noise(0.0, sd);
  for (double& v : out.data) v = std::clamp(v + noise(rng), 0.0, 1.0);
  return out;
}

Volume rasterize_ground_truth(const PhantomField& field, int n_h, int n_w, int n_d, const SceneBounds& bounds,
                              const std::vector<double>& times) {
  if (n_h < 1 || n_w < 1 || n_d < 1) throw std::invalid_argument("rasterize: dims must all be at least 1");
  if (times.empty()) throw std::invalid_argument("rasterize: need at least one time");
  field.validate();
  Volume vol;
  vol.dims = {static_cast<int>(times.size()), n_h, n_w, n_d};
  vol.bounds = bounds;
  vol.times = times;
  vol.data.assign(vol.dims.total_count(), 0.0);
  const Vec3 e = bounds.extent();
  const Vec3 p{e.x / n_h, e.y / n_w, e.z / n_d};
  for (int k = 0; k < vol.dims.n_t; ++k) {
#pragma omp parallel for
    for (int h = 0; h < n_h; ++h)
      for (int w = 0; w < n_w; ++w)
        for (int d = 0; d < n_d; ++d) {
          const Vec3 x = bounds.min_corner + Vec3{(h + 0.5) * p.x, (w + 0.5) * p.y, (d + 0.5) * p.z};
          vol.data[vol.index(k, h, w, d)] = phantom_density(x, times[k], field);
        }
  }
  return vol;
}

ViewPose trajectory_pose(const AcquisitionConfig& config, double fraction) {
  ViewPose pose;
  pose.primary_angle_deg = config.start_angle_deg + fraction * config.arc_deg;
  pose.secondary_angle_deg = config.secondary_angle_deg;
  pose.sdd_mm = config.sdd_mm;
  pose.sod_mm = config.sod_mm;
  pose.pixel_spacing_mm = config.pixel_spacing_mm;
  pose.rows = config.rows;
  pose.cols = config.cols;
  pose.time = std::clamp(fraction, 0.0, 1.0);
  return pose;
}

Acquisition simulate_acquisition(const PhantomField& field, const SceneBounds& bounds,
                                 const AcquisitionConfig& config, const RenderConfig& render) {
  if (config.views < 1) throw std::invalid_argument("acquisition: need at least one view");
  if (config.holdout < 0) throw std::invalid_argument("acquisition: negative held-out count");
  Acquisition out;
  const std::vector<double> fractions = assign_view_times(config.views);
  for (int j = 0; j < config.views; ++j) {
    Projection p = project_phantom(field, trajectory_pose(config, fractions[j]), render, bounds);
    NoiseModel noise = config.noise;
    noise.seed = config.noise.seed * 1000003ULL + static_cast<std::uint64_t>(j);
    p.image = add_noise(p.image, noise);
    out.training.push_back(std::move(p));
  }
  for (int k = 0; k < config.holdout; ++k) {
    const double f = (k + 0.5) / config.holdout;
    out.heldout.push_back(project_phantom(field, trajectory_pose(config, f), render, bounds));
  }
  return out;
}

}  // namespace tiavox
