// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tiavox/image.hpp"

namespace tiavox {

struct SsimParams {
  int window = 11;
  double gaussian_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

// 10 log10(peak^2 / MSE); +infinity when the inputs are identical.
double psnr(std::span<const double> a, std::span<const double> b, double peak);
double psnr(const Image& a, const Image& b, double peak = 1.0);
// Peak defaults to the max of the ground truth `b`.
double psnr(const Volume& a, const Volume& ground_truth, std::optional<double> peak = {});

// Mean SSIM over all valid window positions. Rejects images smaller than the window.
double ssim(const Image& a, const Image& b, const SsimParams& params = {});
// Mean over axial (fixed d) slices of a 3D volume.
double ssim(const Volume& a, const Volume& b, const SsimParams& params = {});

// Normalized 1D Gaussian taps; the 2D window is their outer product.
std::vector<double> gaussian_taps(int size, double sigma);

struct ViewMetrics {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  std::vector<ViewMetrics> views;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::optional<double> psnr_3d;
  std::optional<double> ssim_3d;

  // Recomputes the means from `views`.
  void finalize();
  std::string to_table() const;
  std::string to_json() const;
};

}  // namespace tiavox
