// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

// On-disk formats.
//
//   images      binary graymap (P5), maxval 65535, big-endian 16-bit samples;
//               sample s <-> value s / 65535.
//   volumes     JSON header + raw little-endian float32 payload in the grid's
//               flattened order (t, h, w, d).
//   checkpoints the same header/payload split, carrying the activation bias
//               and pixel model.
//   manifests   JSON: "bounds" plus a "views" array of pose records.
//
// Every header carries "format_version": 1.

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "tiavox/geometry.hpp"
#include "tiavox/grid.hpp"
#include "tiavox/image.hpp"
#include "tiavox/renderer.hpp"

namespace tiavox {

inline constexpr int kFormatVersion = 1;

enum class IoErrc {
  open_failed,
  malformed_header,
  unsupported_maxval,
  truncated_data,
  size_mismatch,
  unsupported_version,
  invalid_manifest,
  write_failed,
};

const char* to_string(IoErrc code);

class IoError : public std::runtime_error {
 public:
  IoError(IoErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  IoErrc code() const { return code_; }

 private:
  IoErrc code_;
};

std::uint16_t quantize_sample(double value);

Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& image);

// `path` names the JSON header; the payload goes next to it with a .raw extension.
Volume read_volume(const std::filesystem::path& path);
void write_volume(const std::filesystem::path& path, const Volume& volume);

struct Checkpoint {
  Grid4D grid;
  PixelModel pixel_model = PixelModel::absorbance;
};

void save_checkpoint(const std::filesystem::path& path, const Grid4D& grid, PixelModel pixel_model);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct ManifestView {
  std::string image;  // relative to the manifest directory
  ViewPose pose;
};

struct Manifest {
  SceneBounds bounds;
  std::vector<ManifestView> views;
  std::filesystem::path base_dir;
};

// Validates poses and times, fills omitted sod (sdd / 2) and omitted times
// (uniform in view order), and checks every referenced image exists with the
// declared size. Errors name the offending view index.
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

// Loads every view image of a manifest.
std::vector<Projection> load_projections(const Manifest& manifest);

}  // namespace tiavox
