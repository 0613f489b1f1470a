// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiavox/image.hpp"

#include <algorithm>
#include <stdexcept>

namespace tiavox {

double Volume::max_value() const {
  if (data.empty()) return 0.0;
  return *std::max_element(data.begin(), data.end());
}

Volume Volume::frame(int t) const {
  if (t < 0 || t >= dims.n_t) throw std::out_of_range("volume frame index out of range");
  Volume out;
  out.dims = {1, dims.n_h, dims.n_w, dims.n_d};
  out.bounds = bounds;
  if (!times.empty()) out.times = {times[t]};
  const std::size_t slice = dims.spatial_count();
  out.data.assign(data.begin() + t * slice, data.begin() + (t + 1) * slice);
  return out;
}

}  // namespace tiavox
