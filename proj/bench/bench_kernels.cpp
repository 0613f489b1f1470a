// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference vs OpenMP kernels: full-view rendering and batch gradient
// accumulation on a 64^3 grid.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <algorithm>
#include <random>

#include "tiavox/phantom.hpp"
#include "tiavox/trainer.hpp"

using namespace tiavox;

namespace {

struct Fixture {
  Grid4D grid;
  std::vector<TrainingView> views;
  std::vector<RaySample> batch;
  ViewPose pose;
  double step = 0.0;

  Fixture() : grid(init_grid({4, 64, 64, 64}, default_phantom_bounds())) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(-3.0, 1.0);
    for (double& v : grid.raw()) v = n(rng);
    AcquisitionConfig ac;
    ac.views = 8;
    ac.holdout = 0;
    const Acquisition a = simulate_acquisition(default_phantom(), default_phantom_bounds(), ac);
    for (const Projection& p : a.training) views.emplace_back(p.pose, p.image);
    batch = draw_batch(rng, views, 8192);
    pose = views[3].pose;
    step = 0.5 * grid.min_pitch();
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_RenderViewSerial(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(render_view_serial(f.pose, f.grid, RenderConfig{}));
  state.SetItemsProcessed(state.iterations() * f.pose.rows * f.pose.cols);
}

void BM_RenderViewOpenMP(benchmark::State& state) {
  const Fixture& f = fixture();
  omp_set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(render_view(f.pose, f.grid, RenderConfig{}));
  state.SetItemsProcessed(state.iterations() * f.pose.rows * f.pose.cols);
}

void run_gradient(benchmark::State& state, int workers) {
  const Fixture& f = fixture();
  std::vector<double> gradient(f.grid.raw().size(), 0.0);
  for (auto _ : state) {
    std::fill(gradient.begin(), gradient.end(), 0.0);
    benchmark::DoNotOptimize(
        accumulate_batch_gradient(f.grid, f.views, f.batch, RenderConfig{}, f.step, nullptr, gradient, workers));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.batch.size()));
}

void BM_GradientSerial(benchmark::State& state) { run_gradient(state, 1); }
void BM_GradientOpenMP(benchmark::State& state) { run_gradient(state, static_cast<int>(state.range(0))); }

}  // namespace

BENCHMARK(BM_RenderViewSerial)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RenderViewOpenMP)->DenseRange(1, 4, 1)->Arg(8)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GradientSerial)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GradientOpenMP)->Arg(2)->Arg(4)->Arg(8)->UseRealTime()->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
