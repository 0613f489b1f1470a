// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "tiavox/geometry.hpp"
#include "tiavox/grid.hpp"

namespace tiavox {

// Row-major single-channel detector image.
struct Image {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Image() = default;
  Image(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const { return data.size(); }
};

// A detector image paired with the pose it was acquired (or rendered) at.
struct Projection {
  ViewPose pose;
  Image image;
};

// Density samples at the voxel centers of a lattice over `bounds`, one 3D
// block per entry of `times`, in the grid's flattened order. A 3D volume is
// the n_t == 1 case.
struct Volume {
  GridDims dims;
  SceneBounds bounds;
  std::vector<double> times;
  std::vector<double> data;

  std::size_t index(int t, int h, int w, int d) const {
    return ((static_cast<std::size_t>(t) * dims.n_h + h) * dims.n_w + w) * dims.n_d + d;
  }
  double max_value() const;
  // One time block as a standalone 3D volume.
  Volume frame(int t) const;
};

}  // namespace tiavox
