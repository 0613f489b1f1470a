// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <random>

#include "tiavox/io.hpp"

using namespace tiavox;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("tiavox_io_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void dump(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

IoErrc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const IoError& e) {
    return e.code();
  }
  FAIL("expected an IoError");
  return IoErrc::write_failed;
}

nlohmann::json view_json(const std::string& image, int rows, int cols) {
  return {{"image", image},       {"primary_angle_deg", 10.0}, {"secondary_angle_deg", 0.0}, {"sdd_mm", 800.0},
          {"pixel_spacing_mm", 1.0}, {"rows", rows},              {"cols", cols}};
}

}  // namespace

TEST_CASE("image round trips", "[io]") {
  TempDir dir("img");
  const Image zero(5, 7);
  write_image(dir.path / "z.pgm", zero);
  const Image z = read_image(dir.path / "z.pgm");
  REQUIRE(z.rows == 5);
  REQUIRE(z.cols == 7);
  REQUIRE(z.data == zero.data);

  REQUIRE(quantize_sample(1.0) == 65535);
  REQUIRE(quantize_sample(0.0) == 0);
  REQUIRE(quantize_sample(2.0) == 65535);
  REQUIRE(quantize_sample(-1.0) == 0);

  Image r(33, 17);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : r.data) v = u(rng);
  r.data[0] = 1.0;
  write_image(dir.path / "r.pgm", r);
  const Image back = read_image(dir.path / "r.pgm");
  REQUIRE(back.at(0, 0) == 1.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < r.data.size(); ++i) worst = std::max(worst, std::abs(back.data[i] - r.data[i]));
  REQUIRE(worst <= 0.5 / 65535.0 + 1e-15);
  REQUIRE(worst <= 7.63e-6);

  write_image(dir.path / "r2.pgm", back);
  REQUIRE(slurp(dir.path / "r.pgm") == slurp(dir.path / "r2.pgm"));

  const std::string bytes = slurp(dir.path / "r.pgm");
  REQUIRE(bytes.rfind("P5\n17 33\n65535\n", 0) == 0);
  // samples are big-endian: the first one is 65535
  REQUIRE(static_cast<unsigned char>(bytes[15]) == 0xff);
  REQUIRE(static_cast<unsigned char>(bytes[16]) == 0xff);
}

TEST_CASE("image errors are distinct", "[io]") {
  TempDir dir("imgerr");
  REQUIRE(code_of([&] { read_image(dir.path / "missing.pgm"); }) == IoErrc::open_failed);
  dump(dir.path / "magic.pgm", "P2\n2 2\n65535\n");
  REQUIRE(code_of([&] { read_image(dir.path / "magic.pgm"); }) == IoErrc::malformed_header);
  dump(dir.path / "dims.pgm", "P5\nx 2\n65535\n");
  REQUIRE(code_of([&] { read_image(dir.path / "dims.pgm"); }) == IoErrc::malformed_header);
  dump(dir.path / "maxval.pgm", std::string("P5\n2 1\n255\n") + std::string(2, '\0'));
  REQUIRE(code_of([&] { read_image(dir.path / "maxval.pgm"); }) == IoErrc::unsupported_maxval);
  dump(dir.path / "short.pgm", std::string("P5\n2 2\n65535\n") + std::string(5, '\0'));
  REQUIRE(code_of([&] { read_image(dir.path / "short.pgm"); }) == IoErrc::truncated_data);
  dump(dir.path / "ok.pgm", std::string("P5\n# comment\n2 2\n65535\n") + std::string(8, '\0'));
  REQUIRE(read_image(dir.path / "ok.pgm").data == std::vector<double>(4, 0.0));
}

TEST_CASE("volume round trips", "[io]") {
  TempDir dir("vol");
  Volume v;
  v.dims = {1, 2, 2, 2};
  v.bounds = {{-1, -2, -3}, {1, 2, 3}};
  v.times = {0.5};
  v.data = {0.0, 0.25, -1.5, 3.0, 1e-3f, 7.0, 0.125, 42.0};
  write_volume(dir.path / "v.json", v);
  REQUIRE(fs::exists(dir.path / "v.raw"));
  REQUIRE(fs::file_size(dir.path / "v.raw") == 32u);
  const Volume b = read_volume(dir.path / "v.json");
  REQUIRE(b.dims == v.dims);
  REQUIRE(b.data == v.data);
  REQUIRE(b.times == v.times);
  REQUIRE(b.bounds.max_corner.z == 3.0);

  Volume v4 = v;
  v4.dims = {4, 1, 1, 2};
  v4.times = {0, 1.0 / 3, 2.0 / 3, 1};
  write_volume(dir.path / "v4.json", v4);
  const auto h = nlohmann::json::parse(slurp(dir.path / "v4.json"));
  REQUIRE(h["dims"] == nlohmann::json::array({4, 1, 1, 2}));
  REQUIRE(h["format_version"] == kFormatVersion);
  REQUIRE(read_volume(dir.path / "v4.json").dims.n_t == 4);
}

TEST_CASE("volume size mismatch names both counts", "[io]") {
  TempDir dir("volerr");
  Volume v;
  v.dims = {1, 2, 2, 2};
  v.times = {0.0};
  v.data.assign(8, 1.0);
  write_volume(dir.path / "v.json", v);
  dump(dir.path / "v.raw", std::string(20, '\0'));
  try {
    read_volume(dir.path / "v.json");
    FAIL("expected a size mismatch");
  } catch (const IoError& e) {
    REQUIRE(e.code() == IoErrc::size_mismatch);
    const std::string msg = e.what();
    REQUIRE(msg.find('8') != std::string::npos);
    REQUIRE(msg.find('5') != std::string::npos);
  }
  auto h = nlohmann::json::parse(slurp(dir.path / "v.json"));
  h["format_version"] = 99;
  dump(dir.path / "v.json", h.dump());
  REQUIRE(code_of([&] { read_volume(dir.path / "v.json"); }) == IoErrc::unsupported_version);
  dump(dir.path / "bad.json", "{ not json");
  REQUIRE(code_of([&] { read_volume(dir.path / "bad.json"); }) == IoErrc::malformed_header);
}

TEST_CASE("checkpoint round trip is exact", "[io]") {
  TempDir dir("ckpt");
  Grid4D g = init_grid({2, 3, 4, 5}, {{-5, -5, -5}, {5, 5, 5}});
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 2.0);
  for (double& v : g.raw()) v = static_cast<float>(n(rng));
  save_checkpoint(dir.path / "c.json", g, PixelModel::line_integral);
  const Checkpoint c = load_checkpoint(dir.path / "c.json");
  REQUIRE(c.pixel_model == PixelModel::line_integral);
  REQUIRE(c.grid.dims() == g.dims());
  REQUIRE(c.grid.activation_bias() == g.activation_bias());
  REQUIRE(std::equal(c.grid.raw().begin(), c.grid.raw().end(), g.raw().begin(), g.raw().end()));

  ViewPose p;
  p.rows = p.cols = 8;
  p.sdd_mm = 100;
  p.sod_mm = 50;
  p.time = 0.4;
  REQUIRE(render_view(p, c.grid, RenderConfig{}).image.data == render_view(p, g, RenderConfig{}).image.data);

  fs::resize_file(dir.path / "c.raw", 12);
  REQUIRE(code_of([&] { load_checkpoint(dir.path / "c.json"); }) == IoErrc::size_mismatch);
}

TEST_CASE("manifest defaults and validation", "[io]") {
  TempDir dir("man");
  write_image(dir.path / "a.pgm", Image(4, 6));
  write_image(dir.path / "b.pgm", Image(4, 6));
  write_image(dir.path / "c.pgm", Image(4, 6));
  nlohmann::json m{{"bounds", {{"min", {-1, -1, -1}}, {"max", {1, 1, 1}}}},
                   {"views", {view_json("a.pgm", 4, 6), view_json("b.pgm", 4, 6), view_json("c.pgm", 4, 6)}}};
  dump(dir.path / "m.json", m.dump());
  const Manifest man = read_manifest(dir.path / "m.json");
  REQUIRE(man.views.size() == 3u);
  REQUIRE(man.views[0].pose.sod_mm == 400.0);
  REQUIRE(man.views[0].pose.time == 0.0);
  REQUIRE(man.views[1].pose.time == 0.5);
  REQUIRE(man.views[2].pose.time == 1.0);
  REQUIRE(load_projections(man).size() == 3u);

  auto expect_invalid = [&](nlohmann::json doc, const std::string& needle) {
    dump(dir.path / "bad.json", doc.dump());
    try {
      read_manifest(dir.path / "bad.json");
      FAIL("expected an invalid manifest");
    } catch (const IoError& e) {
      REQUIRE(e.code() == IoErrc::invalid_manifest);
      INFO(e.what());
      REQUIRE(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  auto partial = m;
  partial["views"][1]["time"] = 0.3;
  expect_invalid(partial, "every view");
  auto late = m;
  for (auto& v : late["views"]) v["time"] = 0.5;
  late["views"][2]["time"] = 1.5;
  expect_invalid(late, "view 2");
  auto missing = m;
  missing["views"][1]["image"] = "nope.pgm";
  expect_invalid(missing, "view 1");
  auto wrong = m;
  wrong["views"][0]["rows"] = 5;
  expect_invalid(wrong, "view 0");
  auto no_views = m;
  no_views["views"] = nlohmann::json::array();
  expect_invalid(no_views, "views");

  Manifest out = man;
  write_manifest(dir.path / "w.json", out);
  const Manifest again = read_manifest(dir.path / "w.json");
  REQUIRE(again.views[1].pose.time == 0.5);
  REQUIRE(again.views[2].image == "c.pgm");
}
