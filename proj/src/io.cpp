// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiavox/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>

#include <json.hpp>

namespace tiavox {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<unsigned char> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoErrc::open_failed, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoErrc::write_failed, "cannot write '" + path.string() + "'");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw IoError(IoErrc::write_failed, "short write to '" + path.string() + "'");
}

json read_json(const fs::path& path) {
  const auto bytes = slurp(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw IoError(IoErrc::malformed_header, "'" + path.string() + "': " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  const std::string text = j.dump(2) + "\n";
  spit(path, text.data(), text.size());
}

// Reads one unsigned decimal header token, skipping whitespace and comments.
bool pgm_token(const std::vector<unsigned char>& buf, std::size_t& pos, long& value) {
  while (pos < buf.size()) {
    if (std::isspace(buf[pos])) {
      ++pos;
    } else if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  if (pos >= buf.size() || !std::isdigit(buf[pos])) return false;
  value = 0;
  while (pos < buf.size() && std::isdigit(buf[pos])) {
    value = value * 10 + (buf[pos] - '0');
    if (value > 1'000'000'000L) return false;
    ++pos;
  }
  return true;
}

fs::path payload_path(const fs::path& header) {
  fs::path p = header;
  p.replace_extension(".raw");
  return p;
}

void write_f32_le(const fs::path& path, std::span<const double> values) {
  std::vector<unsigned char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  spit(path, bytes.data(), bytes.size());
}

std::vector<double> read_f32_le(const fs::path& path, std::size_t expected, const std::string& what) {
  const auto bytes = slurp(path);
  if (bytes.size() != expected * 4)
    throw IoError(IoErrc::size_mismatch, what + ": header dims give " + std::to_string(expected) +
                                             " values but payload holds " + std::to_string(bytes.size() / 4) +
                                             (bytes.size() % 4 ? " (plus a partial value)" : "") + " in '" +
                                             path.string() + "'");
  std::vector<double> out(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
    out[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return out;
}

json bounds_json(const SceneBounds& b) {
  return {{"min", {b.min_corner.x, b.min_corner.y, b.min_corner.z}},
          {"max", {b.max_corner.x, b.max_corner.y, b.max_corner.z}}};
}

SceneBounds bounds_from_json(const json& j) {
  SceneBounds b;
  const auto mn = j.at("min").get<std::vector<double>>();
  const auto mx = j.at("max").get<std::vector<double>>();
  if (mn.size() != 3 || mx.size() != 3) throw std::invalid_argument("bounds corners need three coordinates");
  b.min_corner = {mn[0], mn[1], mn[2]};
  b.max_corner = {mx[0], mx[1], mx[2]};
  b.validate();
  return b;
}

void check_version(const json& j, const fs::path& path) {
  const int v = j.value("format_version", -1);
  if (v != kFormatVersion)
    throw IoError(IoErrc::unsupported_version,
                  "'" + path.string() + "': unsupported format_version " + std::to_string(v));
}

GridDims dims_from_json(const json& j) {
  const auto d = j.get<std::vector<int>>();
  GridDims g;
  if (d.size() == 3) {
    g = {1, d[0], d[1], d[2]};
  } else if (d.size() == 4) {
    g = {d[0], d[1], d[2], d[3]};
  } else {
    throw std::invalid_argument("dims need 3 or 4 entries");
  }
  g.validate();
  return g;
}

}  // namespace

const char* to_string(IoErrc code) {
  switch (code) {
    case IoErrc::open_failed: return "open_failed";
    case IoErrc::malformed_header: return "malformed_header";
    case IoErrc::unsupported_maxval: return "unsupported_maxval";
    case IoErrc::truncated_data: return "truncated_data";
    case IoErrc::size_mismatch: return "size_mismatch";
    case IoErrc::unsupported_version: return "unsupported_version";
    case IoErrc::invalid_manifest: return "invalid_manifest";
    case IoErrc::write_failed: return "write_failed";
  }
  return "unknown";
}

std::uint16_t quantize_sample(double value) {
  const double v = std::clamp(std::isnan(value) ? 0.0 : value, 0.0, 1.0);
  return static_cast<std::uint16_t>(std::lround(v * 65535.0));
}

Image read_image(const fs::path& path) {
  const auto buf = slurp(path);
  const std::string name = "'" + path.string() + "'";
  if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '5')
    throw IoError(IoErrc::malformed_header, name + ": not a binary graymap (missing P5 magic)");
  std::size_t pos = 2;
  long width = 0, height = 0, maxval = 0;
  if (!pgm_token(buf, pos, width) || !pgm_token(buf, pos, height) || !pgm_token(buf, pos, maxval))
    throw IoError(IoErrc::malformed_header, name + ": malformed graymap header");
  if (width < 1 || height < 1) throw IoError(IoErrc::malformed_header, name + ": empty image dimensions");
  if (pos >= buf.size() || !std::isspace(buf[pos]))
    throw IoError(IoErrc::malformed_header, name + ": missing whitespace after maxval");
  ++pos;
  if (maxval != 65535)
    throw IoError(IoErrc::unsupported_maxval, name + ": maxval " + std::to_string(maxval) + ", expected 65535");
  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (buf.size() - pos < 2 * count)
    throw IoError(IoErrc::truncated_data, name + ": expected " + std::to_string(2 * count) + " data bytes, found " +
                                              std::to_string(buf.size() - pos));
  Image img(static_cast<int>(height), static_cast<int>(width));
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned s = (static_cast<unsigned>(buf[pos + 2 * i]) << 8) | buf[pos + 2 * i + 1];
    img.data[i] = s / 65535.0;
  }
  return img;
}

void write_image(const fs::path& path, const Image& image) {
  const std::string header = "P5\n" + std::to_string(image.cols) + " " + std::to_string(image.rows) + "\n65535\n";
  std::vector<unsigned char> bytes(header.begin(), header.end());
  bytes.reserve(header.size() + 2 * image.size());
  for (double v : image.data) {
    const std::uint16_t s = quantize_sample(v);
    bytes.push_back(static_cast<unsigned char>(s >> 8));
    bytes.push_back(static_cast<unsigned char>(s & 0xff));
  }
  spit(path, bytes.data(), bytes.size());
}

Volume read_volume(const fs::path& path) {
  const json h = read_json(path);
  check_version(h, path);
  Volume vol;
  try {
    vol.dims = dims_from_json(h.at("dims"));
    vol.bounds = bounds_from_json(h.at("bounds"));
    vol.times = h.value("times", std::vector<double>{});
  } catch (const std::exception& e) {
    throw IoError(IoErrc::malformed_header, "'" + path.string() + "': " + e.what());
  }
  if (!vol.times.empty() && static_cast<int>(vol.times.size()) != vol.dims.n_t)
    throw IoError(IoErrc::size_mismatch, "'" + path.string() + "': " + std::to_string(vol.times.size()) +
                                             " times for " + std::to_string(vol.dims.n_t) + " frames");
  const fs::path data = path.parent_path() / h.value("data_file", payload_path(path).filename().string());
  vol.data = read_f32_le(data, vol.dims.total_count(), "volume");
  return vol;
}

void write_volume(const fs::path& path, const Volume& volume) {
  if (volume.data.size() != volume.dims.total_count())
    throw IoError(IoErrc::size_mismatch, "volume data length does not match its dims");
  const fs::path data = payload_path(path);
  json h;
  h["format_version"] = kFormatVersion;
  h["kind"] = "volume";
  const GridDims& d = volume.dims;
  h["dims"] = json::array({d.n_t, d.n_h, d.n_w, d.n_d});
  h["bounds"] = bounds_json(volume.bounds);
  h["times"] = volume.times;
  h["data_file"] = data.filename().string();
  h["dtype"] = "float32_le";
  write_f32_le(data, volume.data);
  write_json(path, h);
}

void save_checkpoint(const fs::path& path, const Grid4D& grid, PixelModel pixel_model) {
  const fs::path data = payload_path(path);
  json h;
  h["format_version"] = kFormatVersion;
  h["kind"] = "checkpoint";
  const GridDims& d = grid.dims();
  h["dims"] = json::array({d.n_t, d.n_h, d.n_w, d.n_d});
  h["bounds"] = bounds_json(grid.bounds());
  h["activation_bias"] = grid.activation_bias();
  h["pixel_model"] = to_string(pixel_model);
  h["data_file"] = data.filename().string();
  h["dtype"] = "float32_le";
  write_f32_le(data, grid.raw());
  write_json(path, h);
}

Checkpoint load_checkpoint(const fs::path& path) {
  const json h = read_json(path);
  check_version(h, path);
  GridDims dims;
  SceneBounds bounds;
  double bias = 0.0;
  PixelModel model = PixelModel::absorbance;
  try {
    if (h.value("kind", std::string("checkpoint")) != "checkpoint") throw std::invalid_argument("not a checkpoint");
    dims = dims_from_json(h.at("dims"));
    if (h.at("dims").size() != 4) throw std::invalid_argument("checkpoint dims need 4 entries");
    bounds = bounds_from_json(h.at("bounds"));
    bias = h.at("activation_bias").get<double>();
    model = pixel_model_from_string(h.value("pixel_model", std::string("absorbance")));
  } catch (const std::exception& e) {
    throw IoError(IoErrc::malformed_header, "'" + path.string() + "': " + e.what());
  }
  const fs::path data = path.parent_path() / h.value("data_file", payload_path(path).filename().string());
  std::vector<double> raw = read_f32_le(data, dims.total_count(), "checkpoint");
  return {Grid4D(dims, bounds, bias, std::move(raw)), model};
}

Manifest read_manifest(const fs::path& path) {
  const json j = read_json(path);
  Manifest m;
  m.base_dir = path.parent_path();
  auto fail = [&](const std::string& msg) {
    throw IoError(IoErrc::invalid_manifest, "manifest '" + path.string() + "': " + msg);
  };
  try {
    m.bounds = bounds_from_json(j.at("bounds"));
  } catch (const std::exception& e) {
    fail(std::string("bounds: ") + e.what());
  }
  if (!j.contains("views") || !j["views"].is_array() || j["views"].empty()) fail("needs a non-empty views array");

  std::size_t with_time = 0;
  const auto& views = j["views"];
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto& v = views[i];
    const std::string where = "view " + std::to_string(i) + ": ";
    ManifestView mv;
    try {
      mv.image = v.at("image").get<std::string>();
      mv.pose.primary_angle_deg = v.at("primary_angle_deg").get<double>();
      mv.pose.secondary_angle_deg = v.at("secondary_angle_deg").get<double>();
      mv.pose.sdd_mm = v.at("sdd_mm").get<double>();
      mv.pose.sod_mm = v.contains("sod_mm") ? v["sod_mm"].get<double>() : 0.5 * mv.pose.sdd_mm;
      mv.pose.pixel_spacing_mm = v.at("pixel_spacing_mm").get<double>();
      mv.pose.rows = v.at("rows").get<int>();
      mv.pose.cols = v.at("cols").get<int>();
      if (v.contains("time")) {
        mv.pose.time = v["time"].get<double>();
        ++with_time;
      }
    } catch (const json::exception& e) {
      fail(where + e.what());
    }
    try {
      mv.pose.validate();
    } catch (const std::invalid_argument& e) {
      fail(where + e.what());
    }
    m.views.push_back(mv);
  }
  if (with_time != 0 && with_time != m.views.size()) fail("either every view carries a time or none does");
  if (with_time == 0) {
    const auto times = assign_view_times(static_cast<int>(m.views.size()));
    for (std::size_t i = 0; i < m.views.size(); ++i) m.views[i].pose.time = times[i];
  }
  for (std::size_t i = 0; i < m.views.size(); ++i) {
    const fs::path img = m.base_dir / m.views[i].image;
    const std::string where = "view " + std::to_string(i) + ": ";
    if (!fs::exists(img)) fail(where + "image '" + img.string() + "' does not exist");
    Image probe;
    try {
      probe = read_image(img);
    } catch (const IoError& e) {
      fail(where + e.what());
    }
    if (probe.rows != m.views[i].pose.rows || probe.cols != m.views[i].pose.cols)
      fail(where + "image is " + std::to_string(probe.rows) + "x" + std::to_string(probe.cols) + ", pose declares " +
           std::to_string(m.views[i].pose.rows) + "x" + std::to_string(m.views[i].pose.cols));
  }
  return m;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  json j;
  j["format_version"] = kFormatVersion;
  j["bounds"] = bounds_json(manifest.bounds);
  j["views"] = json::array();
  for (const ManifestView& v : manifest.views) {
    j["views"].push_back({{"image", v.image},
                          {"primary_angle_deg", v.pose.primary_angle_deg},
                          {"secondary_angle_deg", v.pose.secondary_angle_deg},
                          {"sdd_mm", v.pose.sdd_mm},
                          {"sod_mm", v.pose.sod_mm},
                          {"pixel_spacing_mm", v.pose.pixel_spacing_mm},
                          {"rows", v.pose.rows},
                          {"cols", v.pose.cols},
                          {"time", v.pose.time}});
  }
  write_json(path, j);
}

std::vector<Projection> load_projections(const Manifest& manifest) {
  std::vector<Projection> out;
  out.reserve(manifest.views.size());
  for (const ManifestView& v : manifest.views) out.push_back({v.pose, read_image(manifest.base_dir / v.image)});
  return out;
}

}  // namespace tiavox
