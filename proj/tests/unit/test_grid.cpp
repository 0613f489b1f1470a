// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>
#include <algorithm>
#include <cmath>
#include <random>

#include "tiavox/grid.hpp"

using namespace tiavox;
using Catch::Approx;

namespace {

const SceneBounds kBox{{-3.0, -1.0, 0.5}, {3.0, 2.0, 4.5}};

Grid4D random_grid(GridDims dims, std::uint64_t seed, const SceneBounds& box = kBox) {
  Grid4D g = init_grid(dims, box);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 2.0);
  for (double& v : g.raw()) v = n(rng);
  return g;
}

// Hat-function weight of lattice site i for a query at continuous coordinate
// u (in site units, clamped to the lattice).
double hat(double u, int i, int n) {
  u = std::clamp(u, 0.0, static_cast<double>(n - 1));
  return std::max(0.0, 1.0 - std::abs(u - i));
}

double brute_force_raw(const Grid4D& g, const Vec3& x, double t) {
  const GridDims& d = g.dims();
  const Vec3 lo = g.bounds().min_corner;
  const Vec3 p = g.pitch();
  const double uh = (x.x - lo.x) / p.x - 0.5;
  const double uw = (x.y - lo.y) / p.y - 0.5;
  const double ud = (x.z - lo.z) / p.z - 0.5;
  const double ut = d.n_t == 1 ? 0.0 : std::clamp(t, 0.0, 1.0) * (d.n_t - 1);
  double acc = 0.0;
  for (int k = 0; k < d.n_t; ++k) {
    const double wt = d.n_t == 1 ? 1.0 : hat(ut, k, d.n_t);
    if (wt == 0.0) continue;
    for (int h = 0; h < d.n_h; ++h)
      for (int w = 0; w < d.n_w; ++w)
        for (int z = 0; z < d.n_d; ++z) {
          const double ws = hat(uh, h, d.n_h) * hat(uw, w, d.n_w) * hat(ud, z, d.n_d);
          if (ws != 0.0) acc += wt * ws * g.raw()[g.index(k, h, w, z)];
        }
  }
  return acc;
}

Vec3 random_point(std::mt19937_64& rng, const SceneBounds& b) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Vec3 e = b.extent();
  return {b.min_corner.x + u(rng) * e.x, b.min_corner.y + u(rng) * e.y, b.min_corner.z + u(rng) * e.z};
}

}  // namespace

TEST_CASE("softplus activation", "[grid]") {
  REQUIRE(softplus(0.0) == Approx(std::log(2.0)).epsilon(1e-15));
  REQUIRE(std::abs(softplus(50.0) - 50.0) < 1e-9);
  REQUIRE(softplus(-50.0) > 0.0);
  REQUIRE(softplus(-50.0) < 1e-20);
  REQUIRE(std::isfinite(softplus(1e6)));
  REQUIRE(softplus(1e6) == 1e6);
  REQUIRE(softplus(-1e6) >= 0.0);
  double prev = -1.0;
  for (double z = -60.0; z <= 60.0; z += 0.25) {
    REQUIRE(softplus(z) > prev);
    prev = softplus(z);
  }
  for (double s : {1e-8, 1e-4, 0.05, 1.0, 40.0}) REQUIRE(softplus(softplus_inverse(s)) == Approx(s).epsilon(1e-10));
}

TEST_CASE("init_grid sets the initial density everywhere", "[grid]") {
  const Grid4D g = init_grid({2, 3, 4, 5}, kBox, 1e-4);
  REQUIRE(g.raw().size() == 120u);
  for (double r : g.raw()) REQUIRE(std::abs(g.activate(r) - 1e-4) < 1e-10);
  REQUIRE(init_grid({1, 2, 2, 2}, kBox).raw().size() == 8u);
  REQUIRE(GridDims{4, 320, 320, 320}.total_count() == 4ull * 320 * 320 * 320);
  REQUIRE_THROWS_AS(init_grid({1, 2, 2, 2}, kBox, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(init_grid({0, 2, 2, 2}, kBox), std::invalid_argument);
}

TEST_CASE("flattened index order", "[grid]") {
  const Grid4D g = init_grid({3, 4, 5, 6}, kBox);
  REQUIRE(g.index(0, 0, 0, 1) == 1u);
  REQUIRE(g.index(0, 0, 1, 0) == 6u);
  REQUIRE(g.index(0, 1, 0, 0) == 30u);
  REQUIRE(g.index(1, 0, 0, 0) == 120u);
  REQUIRE(g.index(2, 3, 4, 5) == g.raw().size() - 1);
}

TEST_CASE("spatial sampling reproduces voxel centers and centroids", "[grid]") {
  const Grid4D g = random_grid({3, 3, 4, 5}, 1);
  for (int h = 0; h < 3; ++h)
    for (int w = 0; w < 4; ++w)
      for (int d = 0; d < 5; ++d) {
        const auto v = sample_spatial(g.voxel_center(h, w, d), g);
        for (int t = 0; t < 3; ++t) REQUIRE(std::abs(v[t] - g.raw()[g.index(t, h, w, d)]) < 1e-12);
      }
  const Vec3 c = (g.voxel_center(1, 2, 3) + g.voxel_center(2, 3, 4)) * 0.5;
  const auto v = sample_spatial(c, g);
  for (int t = 0; t < 3; ++t) {
    double mean = 0.0;
    for (int a = 1; a <= 2; ++a)
      for (int b = 2; b <= 3; ++b)
        for (int e = 3; e <= 4; ++e) mean += g.raw()[g.index(t, a, b, e)] / 8.0;
    REQUIRE(std::abs(v[t] - mean) < 1e-12);
  }
}

TEST_CASE("interpolation matches a brute-force 4-linear oracle", "[grid]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ut(-0.2, 1.2);
  for (const GridDims dims : {GridDims{1, 3, 3, 3}, GridDims{4, 3, 5, 2}, GridDims{7, 1, 4, 6}}) {
    const Grid4D g = random_grid(dims, 9 + dims.n_t);
    for (int q = 0; q < 1000; ++q) {
      const Vec3 x = random_point(rng, kBox);
      const double t = ut(rng);
      const double expect = brute_force_raw(g, x, t);
      const DensityQuery dq = query_density(x, t, g);
      REQUIRE(std::abs(dq.pre_activation - expect) < 1e-12);
      REQUIRE(std::abs(dq.sigma - g.activate(expect)) < 1e-12);
      double wsum = 0.0, recon = 0.0;
      for (int i = 0; i < dq.count; ++i) {
        wsum += dq.weight[i];
        recon += dq.weight[i] * g.raw()[dq.index[i]];
      }
      REQUIRE(dq.count <= 16);
      REQUIRE(std::abs(wsum - 1.0) < 1e-12);
      REQUIRE(std::abs(recon - expect) < 1e-12);

      const SpatialStencil s = spatial_stencil(dims, kBox, x);
      double ssum = 0.0;
      for (double w : s.weight) ssum += w;
      REQUIRE(std::abs(ssum - 1.0) < 1e-12);
      const TemporalStencil ts = temporal_stencil(dims.n_t, t);
      REQUIRE(std::abs(ts.w0 + ts.w1 - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("out-of-bounds queries return the initial density", "[grid]") {
  const Grid4D g = random_grid({2, 3, 3, 3}, 3);
  const DensityQuery dq = query_density({100.0, 0.0, 0.0}, 0.5, g);
  REQUIRE(dq.count == 0);
  REQUIRE(dq.pre_activation == 0.0);
  REQUIRE(dq.sigma == Approx(kDefaultSigmaInit).epsilon(1e-9));
  for (double v : sample_spatial({0.0, -5.0, 1.0}, g)) REQUIRE(v == 0.0);
}

TEST_CASE("temporal sampling", "[grid]") {
  const std::vector<double> two{0.0, 1.0};
  REQUIRE(sample_temporal(0.25, two) == Approx(0.25).margin(1e-15));
  const std::vector<double> four{1.0, 5.0, -2.0, 7.0};
  for (int k = 0; k < 4; ++k) REQUIRE(sample_temporal(k / 3.0, four) == four[k]);
  REQUIRE(sample_temporal(-1.0, four) == 1.0);
  REQUIRE(sample_temporal(2.0, four) == 7.0);
  const std::vector<double> one{3.5};
  REQUIRE(sample_temporal(0.7, one) == 3.5);
  const TemporalStencil s = temporal_stencil(4, 1.0 / 3.0);
  REQUIRE(((s.k0 == 1 && s.w0 == 1.0) || (s.k1 == 1 && s.w1 == 1.0)));
}

TEST_CASE("uniform grids give uniform density", "[grid]") {
  Grid4D g = init_grid({3, 4, 4, 4}, kBox);
  std::fill(g.raw().begin(), g.raw().end(), 0.7);
  std::mt19937_64 rng(2);
  for (int q = 0; q < 100; ++q)
    REQUIRE(query_density(random_point(rng, kBox), q / 99.0, g).sigma == Approx(g.activate(0.7)).epsilon(1e-14));
}

TEST_CASE("query_density is Lipschitz in x", "[grid]") {
  const Grid4D g = random_grid({2, 5, 5, 5}, 13);
  const auto [lo, hi] = std::minmax_element(g.raw().begin(), g.raw().end());
  const double bound = std::sqrt(3.0) * (*hi - *lo) / g.min_pitch();
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int q = 0; q < 500; ++q) {
    const Vec3 x = random_point(rng, kBox);
    const double eps = 1e-6 * g.min_pitch();
    const Vec3 dx = normalized(Vec3{n(rng), n(rng), n(rng)}) * eps;
    const double ds = std::abs(query_density(x + dx, 0.3, g).sigma - query_density(x, 0.3, g).sigma);
    REQUIRE(ds <= bound * eps * (1.0 + 1e-6) + 1e-15);
  }
}

TEST_CASE("temporal upscale inserts midpoints and preserves the function", "[grid]") {
  Grid4D g = init_grid({2, 1, 1, 1}, kBox);
  g.raw()[0] = 2.0;
  g.raw()[1] = 5.0;
  const Grid4D u = upscale_temporal(g);
  REQUIRE(u.dims().n_t == 3);
  REQUIRE(u.raw()[0] == 2.0);
  REQUIRE(u.raw()[1] == 3.5);
  REQUIRE(u.raw()[2] == 5.0);

  const Grid4D r = random_grid({4, 3, 2, 2}, 21);
  const Grid4D r7 = upscale_temporal(r);
  REQUIRE(r7.dims() == GridDims{7, 3, 2, 2});
  for (int k = 0; k < 4; ++k)
    for (int s = 0; s < 12; ++s) REQUIRE(r7.raw()[2 * k * 12 + s] == r.raw()[k * 12 + s]);
  for (int s = 0; s < 12; ++s) {
    std::vector<double> a(4), b(7);
    for (int k = 0; k < 4; ++k) a[k] = r.raw()[k * 12 + s];
    for (int k = 0; k < 7; ++k) b[k] = r7.raw()[k * 12 + s];
    for (int i = 0; i <= 1000; ++i) REQUIRE(std::abs(sample_temporal(i / 1000.0, a) - sample_temporal(i / 1000.0, b)) < 1e-12);
  }
  REQUIRE_THROWS_AS(upscale_temporal(init_grid({1, 2, 2, 2}, kBox)), std::invalid_argument);
}

TEST_CASE("spatial upscale resamples trilinearly", "[grid]") {
  const Grid4D g = random_grid({2, 3, 3, 3}, 8);
  const Grid4D same = upscale_spatial(g, 3, 3, 3);
  REQUIRE(std::equal(same.raw().begin(), same.raw().end(), g.raw().begin()));

  Grid4D c = init_grid({1, 2, 3, 2}, kBox);
  std::fill(c.raw().begin(), c.raw().end(), -1.25);
  for (double v : upscale_spatial(c, 5, 7, 4).raw()) REQUIRE(std::abs(v + 1.25) < 1e-12);

  REQUIRE_THROWS_AS(upscale_spatial(g, 2, 3, 3), std::invalid_argument);
}

TEST_CASE("2^3 to 4^3 reproduces a linear ramp between old centers", "[grid]") {
  const SceneBounds unit{{0, 0, 0}, {1, 1, 1}};
  Grid4D g = init_grid({1, 2, 2, 2}, unit);
  auto ramp = [](const Vec3& p) { return 1.0 + 2.0 * p.x - 3.0 * p.y + 0.5 * p.z; };
  for (int h = 0; h < 2; ++h)
    for (int w = 0; w < 2; ++w)
      for (int d = 0; d < 2; ++d) g.raw()[g.index(0, h, w, d)] = ramp(g.voxel_center(h, w, d));
  const Grid4D u = upscale_spatial(g, 4, 4, 4);
  for (int h = 0; h < 4; ++h)
    for (int w = 0; w < 4; ++w)
      for (int d = 0; d < 4; ++d) {
        // centers 0.125 and 0.875 lie outside the old centers, where sampling clamps
        auto clamp_c = [](double v) { return std::clamp(v, 0.25, 0.75); };
        const Vec3 x = u.voxel_center(h, w, d);
        const Vec3 xc{clamp_c(x.x), clamp_c(x.y), clamp_c(x.z)};
        REQUIRE(std::abs(u.raw()[u.index(0, h, w, d)] - ramp(xc)) < 1e-12);
      }
}

TEST_CASE("odd-factor spatial upscale preserves the interpolated field", "[grid]") {
  const Grid4D g = random_grid({2, 3, 4, 2}, 31);
  const Grid4D u = upscale_spatial(g, 9, 12, 6);
  std::mt19937_64 rng(1);
  for (int q = 0; q < 1000; ++q) {
    const Vec3 x = random_point(rng, kBox);
    const auto a = sample_spatial(x, g);
    const auto b = sample_spatial(x, u);
    for (int t = 0; t < 2; ++t) REQUIRE(std::abs(a[t] - b[t]) < 1e-12);
  }
}

TEST_CASE("occupancy refresh", "[grid]") {
  Grid4D g = init_grid({2, 6, 6, 6}, kBox, 1e-4);
  REQUIRE(refresh_occupancy(g, 1e-3, 1).occupied_count() == 0u);

  g.raw()[g.index(1, 3, 3, 3)] = 10.0;
  const OccupancyMask m = refresh_occupancy(g, 1e-3, 1);
  REQUIRE(m.occupied_count() == 27u);
  for (int h = 0; h < 6; ++h)
    for (int w = 0; w < 6; ++w)
      for (int d = 0; d < 6; ++d) {
        const bool near = std::abs(h - 3) <= 1 && std::abs(w - 3) <= 1 && std::abs(d - 3) <= 1;
        REQUIRE(m.at(h, w, d) == near);
      }
  REQUIRE(m.occupied_at(g.voxel_center(2, 4, 3)));
  REQUIRE_FALSE(m.occupied_at(g.voxel_center(0, 0, 0)));
  REQUIRE_FALSE(m.occupied_at({100.0, 0.0, 0.0}));
  REQUIRE(refresh_occupancy(g, 1e-3, 0).occupied_count() == 1u);

  Grid4D corner = init_grid({1, 6, 6, 6}, kBox, 1e-4);
  corner.raw()[0] = 10.0;
  REQUIRE(refresh_occupancy(corner, 1e-3, 1).occupied_count() == 8u);

  REQUIRE_THROWS_AS(refresh_occupancy(g, 0.0, 1), std::invalid_argument);
}

TEST_CASE("empty mask voxels stay below threshold at every knot", "[grid]") {
  const Grid4D g = random_grid({3, 5, 5, 5}, 17);
  const double thr = 0.5;
  const OccupancyMask m = refresh_occupancy(g, thr, 1);
  for (int h = 0; h < 5; ++h)
    for (int w = 0; w < 5; ++w)
      for (int d = 0; d < 5; ++d)
        if (!m.at(h, w, d))
          for (int t = 0; t < 3; ++t) REQUIRE(g.activate(g.raw()[g.index(t, h, w, d)]) < thr);
}
