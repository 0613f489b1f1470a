// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiavox/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tiavox {
namespace {

int resolve_workers(int workers) {
#ifdef _OPENMP
  return workers <= 0 ? omp_get_max_threads() : workers;
#else
  (void)workers;
  return 1;
#endif
}

void check_schedule(const std::vector<int>& iters, int iterations, const char* name) {
  for (std::size_t i = 0; i < iters.size(); ++i) {
    if (iters[i] < 0 || iters[i] >= iterations)
      throw std::invalid_argument(std::string(name) + " iteration " + std::to_string(iters[i]) +
                                  " outside [0, iterations)");
    if (i > 0 && iters[i] <= iters[i - 1])
      throw std::invalid_argument(std::string(name) + " iterations must be strictly increasing");
  }
}

bool contains(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

// Resampled values keep float32 precision like every Adam update, so a
// checkpoint reproduces the in-memory grid.
void round_to_float(Grid4D& grid) {
  for (double& v : grid.raw()) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_rays < 1) throw std::invalid_argument("train: batch_rays must be at least 1");
  if (iterations < 1) throw std::invalid_argument("train: iterations must be at least 1");
  if (!(lr0 > 0.0)) throw std::invalid_argument("train: lr0 must be positive");
  if (!(lr_decay_target_factor > 0.0 && lr_decay_target_factor <= 1.0))
    throw std::invalid_argument("train: lr_decay_target_factor must lie in (0, 1]");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw std::invalid_argument("train: Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw std::invalid_argument("train: adam_eps must be positive");
  if (grid_h < 1 || grid_w < 1 || grid_d < 1) throw std::invalid_argument("train: grid dims must be positive");
  if (initial_n_t < 1) throw std::invalid_argument("train: initial_n_t must be at least 1");
  if (initial_n_t == 1 && !temporal_upscale_iters.empty())
    throw std::invalid_argument("train: temporal upscaling needs initial_n_t >= 2");
  if (!(sigma_init > 0.0)) throw std::invalid_argument("train: sigma_init must be positive");
  if (!(initial_spatial_fraction > 0.0 && initial_spatial_fraction <= 1.0))
    throw std::invalid_argument("train: initial_spatial_fraction must lie in (0, 1]");
  if (spatial_upscale_factor < 2) throw std::invalid_argument("train: spatial_upscale_factor must be at least 2");
  if (coarse_stage && coarse_iterations < 1) throw std::invalid_argument("train: coarse_iterations must be positive");
  if (!(occupancy.threshold > 0.0)) throw std::invalid_argument("train: occupancy threshold must be positive");
  if (occupancy.dilation < 0) throw std::invalid_argument("train: occupancy dilation must be non-negative");
  if (occupancy.refresh_interval < 1) throw std::invalid_argument("train: occupancy refresh interval must be positive");
  if (probe_rays < 1) throw std::invalid_argument("train: probe_rays must be at least 1");
  check_schedule(temporal_upscale_iters, iterations, "temporal upscale");
  check_schedule(spatial_upscale_iters, iterations, "spatial upscale");
}

TrainingView::TrainingView(ViewPose p, Image img) : pose(p), image(std::move(img)), camera(pose_to_camera(p)) {
  if (image.rows != pose.rows || image.cols != pose.cols)
    throw std::invalid_argument("training image size does not match its pose");
}

double compute_loss(std::span<const double> rendered, std::span<const double> target) {
  if (rendered.empty()) throw std::invalid_argument("loss: empty batch");
  if (rendered.size() != target.size()) throw std::invalid_argument("loss: rendered/target size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < rendered.size(); ++i) {
    const double r = rendered[i] - target[i];
    acc += r * r;
  }
  return acc / static_cast<double>(rendered.size());
}

double lr_schedule(int iteration, const TrainConfig& config) {
  const double frac = static_cast<double>(iteration) / config.iterations;
  return config.lr0 * std::pow(config.lr_decay_target_factor, frac);
}

std::vector<RaySample> draw_batch(std::mt19937_64& rng, std::span<const TrainingView> views, int count) {
  if (views.empty()) throw std::invalid_argument("batch: no training views");
  std::vector<std::size_t> offsets{0};
  for (const TrainingView& v : views) offsets.push_back(offsets.back() + v.image.size());
  std::uniform_int_distribution<std::size_t> pick(0, offsets.back() - 1);
  std::vector<RaySample> batch(count);
  for (RaySample& s : batch) {
    const std::size_t g = pick(rng);
    const auto it = std::upper_bound(offsets.begin(), offsets.end(), g) - 1;
    s.view = static_cast<int>(it - offsets.begin());
    const std::size_t local = g - *it;
    const int cols = views[s.view].image.cols;
    s.pixel = {static_cast<int>(local / cols), static_cast<int>(local % cols)};
  }
  return batch;
}

double accumulate_batch_gradient(const Grid4D& grid, std::span<const TrainingView> views,
                                 std::span<const RaySample> batch, const RenderConfig& render, double step,
                                 const OccupancyMask* mask, std::span<double> gradient, int workers) {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  if (gradient.size() != grid.raw().size()) throw std::invalid_argument("gradient buffer size mismatch");
  const int n = static_cast<int>(batch.size());
  const double inv_b = 1.0 / n;
  std::vector<double> residual(n, 0.0);
  const int nt = resolve_workers(workers);

  if (nt == 1) {
    for (int i = 0; i < n; ++i) {
      const TrainingView& view = views[batch[i].view];
      const Ray ray = pixel_ray(view.camera, grid.bounds(), batch[i].pixel);
      const double target = view.image.at(batch[i].pixel.row, batch[i].pixel.col);
      const double value = trace_ray_backward(
          ray, grid, view.pose.time, render, step, mask, [&](double p) { return 2.0 * (p - target) * inv_b; },
          [&](std::size_t j, double g) { gradient[j] += g; });
      residual[i] = value - target;
    }
  } else {
#pragma omp parallel for num_threads(nt) schedule(dynamic, 64)
    for (int i = 0; i < n; ++i) {
      const TrainingView& view = views[batch[i].view];
      const Ray ray = pixel_ray(view.camera, grid.bounds(), batch[i].pixel);
      const double target = view.image.at(batch[i].pixel.row, batch[i].pixel.col);
      const double value = trace_ray_backward(
          ray, grid, view.pose.time, render, step, mask, [&](double p) { return 2.0 * (p - target) * inv_b; },
          [&](std::size_t j, double g) {
#pragma omp atomic
            gradient[j] += g;
          });
      residual[i] = value - target;
    }
  }
  double loss = 0.0;
  for (double r : residual) loss += r * r;
  return loss * inv_b;
}

double evaluate_batch_loss(const Grid4D& grid, std::span<const TrainingView> views,
                           std::span<const RaySample> batch, const RenderConfig& render, double step,
                           const OccupancyMask* mask, int workers) {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  const int n = static_cast<int>(batch.size());
  std::vector<double> rendered(n), target(n);
  const int nt = resolve_workers(workers);
#pragma omp parallel for num_threads(nt) if (nt > 1)
  for (int i = 0; i < n; ++i) {
    const TrainingView& view = views[batch[i].view];
    const Ray ray = pixel_ray(view.camera, grid.bounds(), batch[i].pixel);
    rendered[i] = trace_ray(ray, grid, view.pose.time, render, step, mask);
    target[i] = view.image.at(batch[i].pixel.row, batch[i].pixel.col);
  }
  return compute_loss(rendered, target);
}

void adam_update(Grid4D& grid, AdamState& adam, std::span<double> gradient, double lr, const TrainConfig& config) {
  auto raw = grid.raw();
  if (gradient.size() != raw.size() || adam.m.size() != raw.size() || adam.v.size() != raw.size())
    throw std::invalid_argument("Adam state does not match the grid");
  ++adam.step;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam.step));
  const double eps = config.adam_eps;
  const std::size_t n = raw.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double g = gradient[i];
    if (g == 0.0) continue;
    gradient[i] = 0.0;
    double& m = adam.m[i];
    double& v = adam.v[i];
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    const double update = lr * (m / c1) / (std::sqrt(v / c2) + eps);
    raw[i] = static_cast<double>(static_cast<float>(raw[i] - update));
  }
}

double train_step(Grid4D& grid, AdamState& adam, std::span<const TrainingView> views, const TrainConfig& config,
                  const RenderConfig& render, double step, const OccupancyMask* mask, int iteration,
                  StepWorkspace& workspace) {
  if (views.empty()) throw std::invalid_argument("train step: no training views");
  if (workspace.gradient.size() != grid.raw().size()) workspace.gradient.assign(grid.raw().size(), 0.0);
  const std::vector<RaySample> batch = draw_batch(workspace.rng, views, config.batch_rays);
  const double loss =
      accumulate_batch_gradient(grid, views, batch, render, step, mask, workspace.gradient, config.threads);
  adam_update(grid, adam, workspace.gradient, lr_schedule(iteration, config), config);
  return loss;
}

void rescale_schedule(TrainConfig& config, int iterations) {
  if (iterations < 1) throw std::invalid_argument("train: iterations must be at least 1");
  const double ratio = static_cast<double>(iterations) / config.iterations;
  auto rescale = [&](std::vector<int>& iters) {
    std::vector<int> out;
    for (int it : iters) {
      const int v = static_cast<int>(std::lround(it * ratio));
      if (v >= iterations) break;
      if (!out.empty() && v <= out.back()) continue;
      out.push_back(v);
    }
    iters = std::move(out);
  };
  rescale(config.temporal_upscale_iters);
  rescale(config.spatial_upscale_iters);
  if (config.coarse_stage)
    config.coarse_iterations = std::max(1, static_cast<int>(std::lround(config.coarse_iterations * ratio)));
  config.iterations = iterations;
}

std::vector<std::array<int, 3>> spatial_schedule(const TrainConfig& config) {
  const std::array<int, 3> final_dims{config.grid_h, config.grid_w, config.grid_d};
  std::array<int, 3> cur{};
  for (int a = 0; a < 3; ++a)
    cur[a] = std::max(1, static_cast<int>(std::lround(final_dims[a] * config.initial_spatial_fraction)));
  std::vector<std::array<int, 3>> out{cur};
  for (std::size_t e = 0; e < config.spatial_upscale_iters.size(); ++e) {
    const bool last = e + 1 == config.spatial_upscale_iters.size();
    for (int a = 0; a < 3; ++a)
      cur[a] = last ? final_dims[a] : std::min(final_dims[a], cur[a] * config.spatial_upscale_factor);
    out.push_back(cur);
  }
  return out;
}

TrainResult run_schedule(std::span<const TrainingView> views, const SceneBounds& bounds, const TrainConfig& config,
                         const RenderConfig& render, const ProgressCallback& progress) {
  config.validate();
  render.validate();
  bounds.validate();
  if (views.empty()) throw std::invalid_argument("train: no training views");

  TrainResult result;
  const Vec3 e = bounds.extent();
  const double final_pitch = std::min({e.x / config.grid_h, e.y / config.grid_w, e.z / config.grid_d});
  const double step = render.step_size_mm > 0.0 ? render.step_size_mm : 0.5 * final_pitch;
  result.step_size_mm = step;
  RenderConfig fixed_render = render;
  fixed_render.step_size_mm = step;

  const auto spatial = spatial_schedule(config);
  GridDims dims{config.initial_n_t, spatial[0][0], spatial[0][1], spatial[0][2]};
  Grid4D grid = init_grid(dims, bounds, config.sigma_init);

  if (config.coarse_stage) {
    TrainConfig coarse = config;
    coarse.coarse_stage = false;
    coarse.iterations = config.coarse_iterations;
    coarse.initial_n_t = 1;
    coarse.grid_h = dims.n_h;
    coarse.grid_w = dims.n_w;
    coarse.grid_d = dims.n_d;
    coarse.initial_spatial_fraction = 1.0;
    coarse.temporal_upscale_iters.clear();
    coarse.spatial_upscale_iters.clear();
    TrainResult seeded = run_schedule(views, bounds, coarse, fixed_render, {});
    const std::size_t slice = dims.spatial_count();
    auto raw = grid.raw();
    for (int t = 0; t < dims.n_t; ++t)
      std::copy_n(seeded.grid.raw().begin(), slice, raw.begin() + t * slice);
    result.events.push_back({0, ScheduleEventKind::coarse_seed, dims, 0.0, 0.0, 0});
  }

  AdamState adam = AdamState::zeros(grid.raw().size());
  StepWorkspace ws{std::vector<double>(grid.raw().size(), 0.0), std::mt19937_64(config.seed)};
  std::mt19937_64 probe_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  const std::vector<RaySample> probe = draw_batch(probe_rng, views, config.probe_rays);

  OccupancyMask mask;
  std::size_t spatial_stage = 0;
  const auto& occ = config.occupancy;
  result.history.reserve(config.iterations);

  for (int it = 0; it < config.iterations; ++it) {
    bool resized = false;
    auto resample_event = [&](ScheduleEventKind kind, auto&& apply) {
      ScheduleEvent ev;
      ev.iteration = it;
      ev.kind = kind;
      ev.probe_loss_before = evaluate_batch_loss(grid, views, probe, fixed_render, step, nullptr, config.threads);
      apply();
      round_to_float(grid);
      ev.probe_loss_after = evaluate_batch_loss(grid, views, probe, fixed_render, step, nullptr, config.threads);
      ev.dims_after = grid.dims();
      result.events.push_back(ev);
      ws.gradient.assign(grid.raw().size(), 0.0);
      resized = true;
    };

    if (contains(config.spatial_upscale_iters, it)) {
      const auto& next = spatial[++spatial_stage];
      const GridDims& cur = grid.dims();
      if (next[0] != cur.n_h || next[1] != cur.n_w || next[2] != cur.n_d) {
        resample_event(ScheduleEventKind::spatial_upscale, [&] {
          const GridDims old = grid.dims();
          grid = upscale_spatial(grid, next[0], next[1], next[2]);
          if (config.reset_moments_on_upscale) {
            adam = AdamState::zeros(grid.raw().size());
          } else {
            adam.m = resample_spatial_field(adam.m, old, bounds, next[0], next[1], next[2]);
            adam.v = resample_spatial_field(adam.v, old, bounds, next[0], next[1], next[2]);
          }
        });
      }
    }
    if (contains(config.temporal_upscale_iters, it)) {
      resample_event(ScheduleEventKind::temporal_upscale, [&] {
        const GridDims old = grid.dims();
        grid = upscale_temporal(grid);
        if (config.reset_moments_on_upscale) {
          adam = AdamState::zeros(grid.raw().size());
        } else {
          adam.m = upscale_temporal_field(adam.m, old);
          adam.v = upscale_temporal_field(adam.v, old);
        }
      });
    }

    const bool masking = occ.enabled && it >= occ.warmup_iterations;
    if (masking && (resized || mask.empty() || (it - occ.warmup_iterations) % occ.refresh_interval == 0)) {
      mask = refresh_occupancy(grid, occ.threshold, occ.dilation);
      mask.refresh_interval = occ.refresh_interval;
      ScheduleEvent ev;
      ev.iteration = it;
      ev.kind = ScheduleEventKind::occupancy_refresh;
      ev.dims_after = grid.dims();
      ev.occupied_voxels = mask.occupied_count();
      result.events.push_back(ev);
    }

    const double loss =
        train_step(grid, adam, views, config, fixed_render, step, masking ? &mask : nullptr, it, ws);
    const LossRecord rec{it, loss, lr_schedule(it, config)};
    result.history.push_back(rec);
    if (progress) progress(rec, grid);
  }
  result.grid = std::move(grid);
  return result;
}

}  // namespace tiavox
