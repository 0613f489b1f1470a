// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

// Optimization of a Grid4D against sparse projections: mini-batch MSE,
// sparse Adam with exponential learning-rate decay, and a progressive
// spatial/temporal resolution schedule with periodic occupancy refresh.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tiavox/geometry.hpp"
#include "tiavox/grid.hpp"
#include "tiavox/image.hpp"
#include "tiavox/renderer.hpp"

namespace tiavox {

struct OccupancyConfig {
  bool enabled = true;
  double threshold = 1e-3;
  int dilation = 1;
  int refresh_interval = 1000;
  int warmup_iterations = 1000;  // no skipping before this iteration
};

struct TrainConfig {
  int batch_rays = 8192;
  int iterations = 20000;
  double lr0 = 0.1;
  double lr_decay_target_factor = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  // Final lattice; the run starts at initial_spatial_fraction of it.
  int grid_h = 320;
  int grid_w = 320;
  int grid_d = 320;
  int initial_n_t = 4;
  double sigma_init = kDefaultSigmaInit;

  std::vector<int> temporal_upscale_iters{10000};
  std::vector<int> spatial_upscale_iters{2000, 4000, 6000};
  double initial_spatial_fraction = 0.25;
  int spatial_upscale_factor = 2;
  bool reset_moments_on_upscale = false;

  bool coarse_stage = false;
  int coarse_iterations = 5000;

  OccupancyConfig occupancy;
  std::uint64_t seed = 0;
  // 1 runs the serial reference path (bit-reproducible); 0 uses the OpenMP
  // default thread count; larger values request that many threads.
  int threads = 1;
  int probe_rays = 1024;

  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  static AdamState zeros(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0}; }
};

struct TrainingView {
  ViewPose pose;
  Image image;
  Camera camera;

  TrainingView(ViewPose p, Image img);
};

struct RaySample {
  int view = 0;
  PixelIndex pixel;
};

struct LossRecord {
  int iteration = 0;
  double loss = 0.0;
  double lr = 0.0;
};

enum class ScheduleEventKind { spatial_upscale, temporal_upscale, occupancy_refresh, coarse_seed };

struct ScheduleEvent {
  int iteration = 0;
  ScheduleEventKind kind = ScheduleEventKind::spatial_upscale;
  GridDims dims_after;
  // Loss on the fixed probe batch (no occupancy skipping) around the event.
  double probe_loss_before = 0.0;
  double probe_loss_after = 0.0;
  std::size_t occupied_voxels = 0;
};

struct TrainResult {
  Grid4D grid;
  std::vector<LossRecord> history;
  std::vector<ScheduleEvent> events;
  double step_size_mm = 0.0;
};

// Mean of squared differences. Rejects empty or mismatched batches.
double compute_loss(std::span<const double> rendered, std::span<const double> target);

// lr0 * factor^(iteration / iterations).
double lr_schedule(int iteration, const TrainConfig& config);

// Uniform i.i.d. pixels across all training views.
std::vector<RaySample> draw_batch(std::mt19937_64& rng, std::span<const TrainingView> views, int count);

// Renders every ray of the batch and adds dLoss/draw into `gradient` (which
// must be zero on entry for a fresh batch). Returns the batch MSE. The serial
// path (workers == 1) has a fixed reduction order.
double accumulate_batch_gradient(const Grid4D& grid, std::span<const TrainingView> views,
                                 std::span<const RaySample> batch, const RenderConfig& render, double step,
                                 const OccupancyMask* mask, std::span<double> gradient, int workers);

// Forward-only MSE of a batch.
double evaluate_batch_loss(const Grid4D& grid, std::span<const TrainingView> views,
                           std::span<const RaySample> batch, const RenderConfig& render, double step,
                           const OccupancyMask* mask, int workers);

// One Adam step on every entry with a nonzero gradient; those gradient
// entries are reset to zero. Updated raw values are rounded to float32 so
// checkpoints reproduce the in-memory grid exactly.
void adam_update(Grid4D& grid, AdamState& adam, std::span<double> gradient, double lr, const TrainConfig& config);

struct StepWorkspace {
  std::vector<double> gradient;
  std::mt19937_64 rng;
};

// One optimization iteration; returns the batch loss before the update.
double train_step(Grid4D& grid, AdamState& adam, std::span<const TrainingView> views, const TrainConfig& config,
                  const RenderConfig& render, double step, const OccupancyMask* mask, int iteration,
                  StepWorkspace& workspace);

// Rescales the upscale (and coarse-stage) iterations of `config`
// proportionally from config.iterations to `iterations`, keeping every entry
// strictly increasing and inside the new range, then sets config.iterations.
// Occupancy timing is left alone: a mask built from a barely trained grid
// would skip nearly every sample.
void rescale_schedule(TrainConfig& config, int iterations);

// Spatial lattice sizes visited by the progressive schedule, starting dims first.
std::vector<std::array<int, 3>> spatial_schedule(const TrainConfig& config);

// Called after every iteration with the updated grid (for logging and
// periodic checkpoints).
using ProgressCallback = std::function<void(const LossRecord&, const Grid4D&)>;

TrainResult run_schedule(std::span<const TrainingView> views, const SceneBounds& bounds, const TrainConfig& config,
                         const RenderConfig& render, const ProgressCallback& progress = {});

}  // namespace tiavox
