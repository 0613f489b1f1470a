// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiavox/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace tiavox {
namespace {

// Valid-mode separable filter of a rows x cols plane.
std::vector<double> filter_valid(const std::vector<double>& src, int rows, int cols, const std::vector<double>& taps) {
  const int k = static_cast<int>(taps.size());
  const int out_r = rows - k + 1;
  const int out_c = cols - k + 1;
  std::vector<double> horiz(static_cast<std::size_t>(rows) * out_c);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < out_c; ++c) {
      double acc = 0.0;
      for (int j = 0; j < k; ++j) acc += taps[j] * src[static_cast<std::size_t>(r) * cols + c + j];
      horiz[static_cast<std::size_t>(r) * out_c + c] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(out_r) * out_c);
  for (int r = 0; r < out_r; ++r)
    for (int c = 0; c < out_c; ++c) {
      double acc = 0.0;
      for (int j = 0; j < k; ++j) acc += taps[j] * horiz[static_cast<std::size_t>(r + j) * out_c + c];
      out[static_cast<std::size_t>(r) * out_c + c] = acc;
    }
  return out;
}

double ssim_plane(const std::vector<double>& a, const std::vector<double>& b, int rows, int cols,
                  const SsimParams& p) {
  if (rows < p.window || cols < p.window)
    throw std::invalid_argument("ssim: image smaller than the " + std::to_string(p.window) + "-pixel window");
  const std::vector<double> taps = gaussian_taps(p.window, p.gaussian_sigma);
  const std::size_t n = a.size();
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = filter_valid(a, rows, cols, taps);
  const auto mu_b = filter_valid(b, rows, cols, taps);
  const auto e_aa = filter_valid(aa, rows, cols, taps);
  const auto e_bb = filter_valid(bb, rows, cols, taps);
  const auto e_ab = filter_valid(ab, rows, cols, taps);
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

std::string fmt_db(double v) {
  if (std::isinf(v)) return "identical";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

nlohmann::json db_json(double v) { return std::isinf(v) ? nlohmann::json("identical") : nlohmann::json(v); }

}  // namespace

std::vector<double> gaussian_taps(int size, double sigma) {
  std::vector<double> taps(size);
  const double c = 0.5 * (size - 1);
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    taps[i] = std::exp(-((i - c) * (i - c)) / (2.0 * sigma * sigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

double psnr(std::span<const double> a, std::span<const double> b, double peak) {
  if (a.size() != b.size()) throw std::invalid_argument("psnr: shape mismatch");
  if (a.empty()) throw std::invalid_argument("psnr: empty input");
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double psnr(const Image& a, const Image& b, double peak) {
  if (a.rows != b.rows || a.cols != b.cols) throw std::invalid_argument("psnr: image shape mismatch");
  return psnr(a.data, b.data, peak);
}

double psnr(const Volume& a, const Volume& ground_truth, std::optional<double> peak) {
  if (!(a.dims == ground_truth.dims)) throw std::invalid_argument("psnr: volume shape mismatch");
  return psnr(a.data, ground_truth.data, peak.value_or(ground_truth.max_value()));
}

double ssim(const Image& a, const Image& b, const SsimParams& params) {
  if (a.rows != b.rows || a.cols != b.cols) throw std::invalid_argument("ssim: image shape mismatch");
  return ssim_plane(a.data, b.data, a.rows, a.cols, params);
}

double ssim(const Volume& a, const Volume& b, const SsimParams& params) {
  if (!(a.dims == b.dims)) throw std::invalid_argument("ssim: volume shape mismatch");
  const GridDims& d = a.dims;
  double total = 0.0;
  int count = 0;
  std::vector<double> sa(static_cast<std::size_t>(d.n_h) * d.n_w), sb(sa.size());
  for (int t = 0; t < d.n_t; ++t)
    for (int z = 0; z < d.n_d; ++z) {
      for (int h = 0; h < d.n_h; ++h)
        for (int w = 0; w < d.n_w; ++w) {
          sa[static_cast<std::size_t>(h) * d.n_w + w] = a.data[a.index(t, h, w, z)];
          sb[static_cast<std::size_t>(h) * d.n_w + w] = b.data[b.index(t, h, w, z)];
        }
      total += ssim_plane(sa, sb, d.n_h, d.n_w, params);
      ++count;
    }
  return total / count;
}

void MetricReport::finalize() {
  if (views.empty()) return;
  double p = 0.0, s = 0.0;
  for (const ViewMetrics& v : views) {
    p += v.psnr;
    s += v.ssim;
  }
  mean_psnr = p / views.size();
  mean_ssim = s / views.size();
}

std::string MetricReport::to_table() const {
  std::string out;
  char line[160];
  if (!views.empty()) {
    std::snprintf(line, sizeof(line), "%-24s %10s %8s\n", "view", "PSNR(dB)", "SSIM");
    out += line;
    for (const ViewMetrics& v : views) {
      std::snprintf(line, sizeof(line), "%-24s %10s %8.4f\n", v.name.c_str(), fmt_db(v.psnr).c_str(), v.ssim);
      out += line;
    }
    std::snprintf(line, sizeof(line), "%-24s %10s %8.4f\n", "mean", fmt_db(mean_psnr).c_str(), mean_ssim);
    out += line;
  }
  if (psnr_3d) {
    std::snprintf(line, sizeof(line), "%-24s %10s %8.4f\n", "3d", fmt_db(*psnr_3d).c_str(), ssim_3d.value_or(0.0));
    out += line;
  }
  return out;
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["views"] = nlohmann::json::array();
  for (const ViewMetrics& v : views) j["views"].push_back({{"name", v.name}, {"psnr", db_json(v.psnr)}, {"ssim", v.ssim}});
  if (!views.empty()) {
    j["mean_psnr"] = db_json(mean_psnr);
    j["mean_ssim"] = mean_ssim;
  }
  if (psnr_3d) j["psnr_3d"] = db_json(*psnr_3d);
  if (ssim_3d) j["ssim_3d"] = *ssim_3d;
  return j.dump(2);
}

}  // namespace tiavox
