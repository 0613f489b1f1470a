// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiavox/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <json.hpp>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "tiavox/io.hpp"
#include "tiavox/metrics.hpp"
#include "tiavox/phantom.hpp"

namespace tiavox {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename T>
void take(const json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: bad value for \"") + key + "\"");
  }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const char* where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(std::string(where) + ": unknown key \"" + it.key() + "\"");
}

std::string view_name(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03zu.pgm", prefix, i);
  return buf;
}

void write_projection_set(const fs::path& dir, const std::vector<Projection>& projections,
                          const SceneBounds& bounds) {
  fs::create_directories(dir);
  Manifest m;
  m.bounds = bounds;
  for (std::size_t i = 0; i < projections.size(); ++i) {
    const std::string name = view_name("view", i);
    write_image(dir / name, projections[i].image);
    m.views.push_back({name, projections[i].pose});
  }
  write_manifest(dir / "manifest.json", m);
}

std::vector<TrainingView> to_training_views(const std::vector<Projection>& projections) {
  std::vector<TrainingView> views;
  views.reserve(projections.size());
  for (const Projection& p : projections) views.emplace_back(p.pose, p.image);
  return views;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}

// Flags shared by subcommands that train or render.
struct RenderFlags {
  double step = 0.0;
  std::string pixel_model;
  double i0 = 0.0;
  CLI::Option* step_opt = nullptr;
  CLI::Option* model_opt = nullptr;
  CLI::Option* i0_opt = nullptr;

  void add(CLI::App* app) {
    step_opt = app->add_option("--step", step, "ray-march step in mm (0: half the smallest voxel pitch)");
    model_opt = app->add_option("--pixel-model", pixel_model, "absorbance or line_integral");
    i0_opt = app->add_option("--i0", i0, "source intensity of the absorbance model");
  }
  void apply(RenderConfig& r) const {
    if (step_opt->count()) r.step_size_mm = step;
    if (model_opt->count()) r.pixel_model = pixel_model_from_string(pixel_model);
    if (i0_opt->count()) r.i0 = i0;
  }
};

int cmd_phantom(const fs::path& out_dir, AcquisitionConfig acq, bool static_mode, int gt_size, int gt_frames,
                const RenderConfig& render, std::ostream& out) {
  if (gt_size < 1) throw std::invalid_argument("phantom: --gt-size must be positive");
  if (gt_frames < 1) throw std::invalid_argument("phantom: --gt-frames must be positive");
  const PhantomField field = default_phantom(static_mode);
  const SceneBounds bounds = default_phantom_bounds();
  const Acquisition a = simulate_acquisition(field, bounds, acq, render);
  write_projection_set(out_dir, a.training, bounds);
  if (!a.heldout.empty()) write_projection_set(out_dir / "heldout", a.heldout, bounds);
  const std::vector<double> times = static_mode ? std::vector<double>{0.0} : assign_view_times(gt_frames);
  write_volume(out_dir / "ground_truth.json", rasterize_ground_truth(field, gt_size, gt_size, gt_size, bounds, times));
  out << "wrote " << a.training.size() << " training views, " << a.heldout.size() << " held-out views and a "
      << times.size() << "-frame ground truth to " << out_dir.string() << "\n";
  return 0;
}

int cmd_reconstruct(const fs::path& manifest_path, const fs::path& out, fs::path log_path, int log_every,
                    int checkpoint_every, const TrainConfig& train, const RenderConfig& render, bool verbose,
                    std::ostream& err) {
  if (log_every < 1) throw std::invalid_argument("reconstruct: --log-every must be positive");
  if (checkpoint_every < 0) throw std::invalid_argument("reconstruct: --checkpoint-every must be non-negative");
  const Manifest manifest = read_manifest(manifest_path);
  const std::vector<TrainingView> views = to_training_views(load_projections(manifest));
  if (log_path.empty()) log_path = fs::path(out).replace_extension(".loss.csv");
  std::ofstream log(log_path);
  if (!log) throw IoError(IoErrc::open_failed, "cannot write " + log_path.string());

  const ProgressCallback progress = [&](const LossRecord& rec, const Grid4D& grid) {
    const int done = rec.iteration + 1;
    if (rec.iteration % log_every == 0 || done == train.iterations) {
      log << rec.iteration << "," << fmt(rec.loss) << "," << fmt(rec.lr) << "\n";
      if (verbose) err << "iter " << rec.iteration << " loss " << fmt(rec.loss) << "\n";
    }
    if (checkpoint_every > 0 && done % checkpoint_every == 0 && done < train.iterations) {
      fs::path snap = out;
      snap.replace_filename(out.stem().string() + "_" + std::to_string(done) + out.extension().string());
      save_checkpoint(snap, grid, render.pixel_model);
    }
  };
  const TrainResult result = run_schedule(views, manifest.bounds, train, render, progress);
  if (!log) throw IoError(IoErrc::write_failed, "failed writing " + log_path.string());
  save_checkpoint(out, result.grid, render.pixel_model);
  return 0;
}

}  // namespace

void apply_config_text(const std::string& json_text, TrainConfig& train, RenderConfig& render) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  check_keys(j,
             {"batch_rays", "iterations", "lr0", "lr_decay_target_factor", "adam_beta1", "adam_beta2", "adam_eps",
              "grid_h", "grid_w", "grid_d", "initial_n_t", "sigma_init", "temporal_upscale_iters",
              "spatial_upscale_iters", "initial_spatial_fraction", "spatial_upscale_factor",
              "reset_moments_on_upscale", "coarse_stage", "coarse_iterations", "occupancy", "seed", "threads",
              "probe_rays", "step_size_mm", "pixel_model", "i0"},
             "config");
  // A new iteration count carries the schedule along; explicit lists below win.
  if (j.contains("iterations")) {
    int iters = train.iterations;
    take(j, "iterations", iters);
    rescale_schedule(train, iters);
  }
  take(j, "batch_rays", train.batch_rays);
  take(j, "lr0", train.lr0);
  take(j, "lr_decay_target_factor", train.lr_decay_target_factor);
  take(j, "adam_beta1", train.adam_beta1);
  take(j, "adam_beta2", train.adam_beta2);
  take(j, "adam_eps", train.adam_eps);
  take(j, "grid_h", train.grid_h);
  take(j, "grid_w", train.grid_w);
  take(j, "grid_d", train.grid_d);
  take(j, "initial_n_t", train.initial_n_t);
  take(j, "sigma_init", train.sigma_init);
  take(j, "temporal_upscale_iters", train.temporal_upscale_iters);
  take(j, "spatial_upscale_iters", train.spatial_upscale_iters);
  take(j, "initial_spatial_fraction", train.initial_spatial_fraction);
  take(j, "spatial_upscale_factor", train.spatial_upscale_factor);
  take(j, "reset_moments_on_upscale", train.reset_moments_on_upscale);
  take(j, "coarse_stage", train.coarse_stage);
  take(j, "coarse_iterations", train.coarse_iterations);
  take(j, "seed", train.seed);
  take(j, "threads", train.threads);
  take(j, "probe_rays", train.probe_rays);
  if (j.contains("occupancy")) {
    const json& o = j.at("occupancy");
    if (!o.is_object()) throw ConfigError("config: \"occupancy\" must be an object");
    check_keys(o, {"enabled", "threshold", "dilation", "refresh_interval", "warmup_iterations"}, "config.occupancy");
    take(o, "enabled", train.occupancy.enabled);
    take(o, "threshold", train.occupancy.threshold);
    take(o, "dilation", train.occupancy.dilation);
    take(o, "refresh_interval", train.occupancy.refresh_interval);
    take(o, "warmup_iterations", train.occupancy.warmup_iterations);
  }
  take(j, "step_size_mm", render.step_size_mm);
  take(j, "i0", render.i0);
  if (j.contains("pixel_model")) {
    std::string name;
    take(j, "pixel_model", name);
    render.pixel_model = pixel_model_from_string(name);
  }
}

void apply_config_file(const fs::path& path, TrainConfig& train, RenderConfig& render) {
  std::ifstream in(path);
  if (!in) throw IoError(IoErrc::open_failed, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(ss.str(), train, render);
}

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"TiAVox: 4D attenuation voxel reconstruction from sparse rotational projections", "tiavox"};
  app.require_subcommand(1);
  app.fallthrough(false);

  // phantom
  const AcquisitionConfig acq_defaults;
  AcquisitionConfig acq;
  std::string ph_out;
  bool ph_static = false;
  int gt_size = 96;
  int gt_frames = 5;
  RenderFlags ph_render;
  auto* ph = app.add_subcommand("phantom", "simulate projections and ground truth of the built-in phantom");
  ph->add_option("--out", ph_out, "output directory")->required();
  ph->add_option("--views", acq.views, "training views")->capture_default_str();
  ph->add_option("--holdout", acq.holdout, "noise-free held-out views")->capture_default_str();
  ph->add_option("--start-angle", acq.start_angle_deg, "first primary angle (deg)")->capture_default_str();
  ph->add_option("--arc", acq.arc_deg, "primary-angle sweep (deg)")->capture_default_str();
  ph->add_option("--secondary", acq.secondary_angle_deg, "secondary angle (deg)")->capture_default_str();
  ph->add_option("--sdd", acq.sdd_mm, "source-detector distance (mm)")->capture_default_str();
  ph->add_option("--sod", acq.sod_mm, "source-isocenter distance (mm)")->capture_default_str();
  ph->add_option("--spacing", acq.pixel_spacing_mm, "detector pixel pitch (mm)")->capture_default_str();
  ph->add_option("--rows", acq.rows, "detector rows")->capture_default_str();
  ph->add_option("--cols", acq.cols, "detector columns")->capture_default_str();
  ph->add_option("--noise", acq.noise.gaussian_std_fraction, "noise std as a fraction of the image max")
      ->capture_default_str();
  ph->add_option("--seed", acq.noise.seed, "noise seed")->capture_default_str();
  ph->add_flag("--static", ph_static, "fill every vessel from t = 0");
  ph->add_option("--gt-size", gt_size, "ground-truth lattice size per axis")->capture_default_str();
  ph->add_option("--gt-frames", gt_frames, "ground-truth time frames (dynamic phantom)")->capture_default_str();
  ph_render.add(ph);

  // reconstruct
  std::string rc_manifest, rc_out, rc_config, rc_log;
  int rc_log_every = 100, rc_ckpt_every = 0;
  int rc_iters = 0, rc_batch = 0, rc_grid = 0, rc_nt = 0, rc_threads = 0;
  double rc_lr = 0.0;
  std::uint64_t rc_seed = 0;
  bool rc_no_occ = false, rc_coarse = false, rc_verbose = false;
  std::vector<int> rc_tup, rc_sup;
  RenderFlags rc_render;
  auto* rc = app.add_subcommand("reconstruct", "fit a 4D grid to the views of a manifest");
  rc->add_option("--manifest", rc_manifest, "training manifest")->required();
  rc->add_option("--out", rc_out, "checkpoint header path")->required();
  rc->add_option("--config", rc_config, "JSON config applied before the flags");
  rc->add_option("--log", rc_log, "loss log (default: <out>.loss.csv)");
  rc->add_option("--log-every", rc_log_every, "iterations between loss log lines")->capture_default_str();
  rc->add_option("--checkpoint-every", rc_ckpt_every, "iterations between intermediate checkpoints (0: none)")
      ->capture_default_str();
  auto* o_iters = rc->add_option("--iters", rc_iters, "iterations (rescales the default schedule)");
  auto* o_batch = rc->add_option("--batch", rc_batch, "rays per batch");
  auto* o_grid = rc->add_option("--grid", rc_grid, "final lattice size on every spatial axis");
  auto* o_nt = rc->add_option("--nt", rc_nt, "initial time knots");
  auto* o_lr = rc->add_option("--lr", rc_lr, "initial learning rate");
  auto* o_seed = rc->add_option("--seed", rc_seed, "batch sampling seed");
  auto* o_threads = rc->add_option("--threads", rc_threads, "workers (1: serial reference, 0: all cores)");
  auto* o_tup = rc->add_option("--temporal-upscale", rc_tup, "iterations of temporal upscales")->delimiter(',');
  auto* o_sup = rc->add_option("--spatial-upscale", rc_sup, "iterations of spatial upscales")->delimiter(',');
  rc->add_flag("--no-occupancy", rc_no_occ, "disable empty-space skipping");
  rc->add_flag("--coarse", rc_coarse, "seed with a static coarse stage");
  rc->add_flag("-v,--verbose", rc_verbose, "print logged losses to stderr");
  rc_render.add(rc);

  // render
  std::string rd_ckpt, rd_out, rd_manifest;
  int rd_view = -1;
  double rd_time = 0.0;
  ViewPose rd_pose = trajectory_pose(acq_defaults, 0.0);
  RenderFlags rd_render;
  auto* rd = app.add_subcommand("render", "render one detector image from a checkpoint");
  rd->add_option("--checkpoint", rd_ckpt, "checkpoint header")->required();
  rd->add_option("--out", rd_out, "output image (.pgm)")->required();
  rd->add_option("--manifest", rd_manifest, "take the pose from this manifest");
  rd->add_option("--view", rd_view, "view index within --manifest");
  rd->add_option("--primary", rd_pose.primary_angle_deg, "primary angle (deg)")->capture_default_str();
  rd->add_option("--secondary", rd_pose.secondary_angle_deg, "secondary angle (deg)")->capture_default_str();
  rd->add_option("--sdd", rd_pose.sdd_mm, "source-detector distance (mm)")->capture_default_str();
  rd->add_option("--sod", rd_pose.sod_mm, "source-isocenter distance (mm)")->capture_default_str();
  rd->add_option("--spacing", rd_pose.pixel_spacing_mm, "detector pixel pitch (mm)")->capture_default_str();
  rd->add_option("--rows", rd_pose.rows, "detector rows")->capture_default_str();
  rd->add_option("--cols", rd_pose.cols, "detector columns")->capture_default_str();
  auto* o_time = rd->add_option("--time", rd_time, "normalized time in [0, 1]");
  rd_render.add(rd);

  // export
  std::string ex_ckpt, ex_out;
  std::vector<double> ex_times;
  int ex_size = 0;
  auto* ex = app.add_subcommand("export", "sample the activated density on a regular lattice");
  ex->add_option("--checkpoint", ex_ckpt, "checkpoint header")->required();
  ex->add_option("--out", ex_out, "volume header path")->required();
  ex->add_option("--time", ex_times, "normalized times (default 0)")->delimiter(',');
  ex->add_option("--size", ex_size, "lattice size per axis (default: the checkpoint's)");

  // eval2d
  std::string e2_ckpt, e2_manifest, e2_json;
  RenderFlags e2_render;
  auto* e2 = app.add_subcommand("eval2d", "PSNR/SSIM of rendered views against a manifest");
  e2->add_option("--checkpoint", e2_ckpt, "checkpoint header")->required();
  e2->add_option("--manifest", e2_manifest, "reference views")->required();
  e2->add_option("--json", e2_json, "also write the report as JSON");
  e2_render.add(e2);

  // eval3d
  std::string e3_ckpt, e3_gt, e3_json;
  auto* e3 = app.add_subcommand("eval3d", "PSNR/SSIM of exported frames against a ground-truth volume");
  e3->add_option("--checkpoint", e3_ckpt, "checkpoint header")->required();
  e3->add_option("--ground-truth", e3_gt, "ground-truth volume header")->required();
  e3->add_option("--json", e3_json, "also write the report as JSON");

  if (argc > 1 && argv[1][0] != '-') {
    bool known = false;
    for (const CLI::App* sub : app.get_subcommands({})) known = known || sub->get_name() == argv[1];
    if (!known) {
      err << "tiavox: usage error: unknown subcommand '" << argv[1] << "'\n";
      return 2;
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "tiavox: usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (ph->parsed()) {
      RenderConfig render;
      ph_render.apply(render);
      return cmd_phantom(ph_out, acq, ph_static, gt_size, gt_frames, render, out);
    }
    if (rc->parsed()) {
      TrainConfig train;
      RenderConfig render;
      if (!rc_config.empty()) apply_config_file(rc_config, train, render);
      if (o_iters->count()) rescale_schedule(train, rc_iters);
      if (o_batch->count()) train.batch_rays = rc_batch;
      if (o_grid->count()) train.grid_h = train.grid_w = train.grid_d = rc_grid;
      if (o_nt->count()) train.initial_n_t = rc_nt;
      if (o_lr->count()) train.lr0 = rc_lr;
      if (o_seed->count()) train.seed = rc_seed;
      if (o_threads->count()) train.threads = rc_threads;
      if (o_tup->count()) train.temporal_upscale_iters = rc_tup;
      if (o_sup->count()) train.spatial_upscale_iters = rc_sup;
      if (rc_no_occ) train.occupancy.enabled = false;
      if (rc_coarse) train.coarse_stage = true;
      // A single time knot cannot be upscaled in time.
      if (train.initial_n_t == 1 && !o_tup->count()) train.temporal_upscale_iters.clear();
      rc_render.apply(render);
      return cmd_reconstruct(rc_manifest, rc_out, rc_log, rc_log_every, rc_ckpt_every, train, render, rc_verbose,
                             err);
    }
    if (rd->parsed()) {
      const Checkpoint ck = load_checkpoint(rd_ckpt);
      RenderConfig render;
      render.pixel_model = ck.pixel_model;
      rd_render.apply(render);
      ViewPose pose = rd_pose;
      if (!rd_manifest.empty()) {
        const Manifest m = read_manifest(rd_manifest);
        if (rd_view < 0 || rd_view >= static_cast<int>(m.views.size()))
          throw std::invalid_argument("render: --view must index a view of --manifest");
        pose = m.views[rd_view].pose;
      } else if (rd_view >= 0) {
        throw std::invalid_argument("render: --view needs --manifest");
      }
      if (o_time->count()) pose.time = rd_time;
      write_image(rd_out, render_view(pose, ck.grid, render).image);
      return 0;
    }
    if (ex->parsed()) {
      const Checkpoint ck = load_checkpoint(ex_ckpt);
      const GridDims& g = ck.grid.dims();
      if (ex_size < 0) throw std::invalid_argument("export: --size must be positive");
      const int nh = ex_size > 0 ? ex_size : g.n_h;
      const int nw = ex_size > 0 ? ex_size : g.n_w;
      const int nd = ex_size > 0 ? ex_size : g.n_d;
      if (ex_times.empty()) ex_times.push_back(0.0);
      Volume vol;
      for (std::size_t k = 0; k < ex_times.size(); ++k) {
        Volume f = export_volume(ck.grid, ex_times[k], nh, nw, nd);
        if (k == 0) {
          vol = std::move(f);
        } else {
          vol.data.insert(vol.data.end(), f.data.begin(), f.data.end());
          vol.times.push_back(f.times.front());
          ++vol.dims.n_t;
        }
      }
      write_volume(ex_out, vol);
      return 0;
    }
    if (e2->parsed()) {
      const Checkpoint ck = load_checkpoint(e2_ckpt);
      RenderConfig render;
      render.pixel_model = ck.pixel_model;
      e2_render.apply(render);
      const Manifest m = read_manifest(e2_manifest);
      const std::vector<Projection> refs = load_projections(m);
      const SsimParams sp;
      MetricReport report;
      for (std::size_t i = 0; i < refs.size(); ++i) {
        const Image img = render_view(refs[i].pose, ck.grid, render).image;
        ViewMetrics vm{m.views[i].image, psnr(img, refs[i].image), std::numeric_limits<double>::quiet_NaN()};
        if (img.rows >= sp.window && img.cols >= sp.window) vm.ssim = ssim(img, refs[i].image, sp);
        report.views.push_back(vm);
      }
      report.finalize();
      out << report.to_table();
      if (!e2_json.empty()) {
        std::ofstream js(e2_json);
        if (!(js << report.to_json())) throw IoError(IoErrc::write_failed, "cannot write " + e2_json);
      }
      return 0;
    }
    if (e3->parsed()) {
      const Checkpoint ck = load_checkpoint(e3_ckpt);
      const Volume gt = read_volume(e3_gt);
      const GridDims& d = gt.dims;
      const double peak = gt.max_value();
      const SsimParams sp{.dynamic_range = peak > 0.0 ? peak : 1.0};
      MetricReport report;
      for (int k = 0; k < d.n_t; ++k) {
        const Volume ref = gt.frame(k);
        const Volume rec = export_volume(ck.grid, gt.times[k], d.n_h, d.n_w, d.n_d);
        ViewMetrics vm{"t=" + fmt(gt.times[k]), psnr(rec, ref, peak), std::numeric_limits<double>::quiet_NaN()};
        if (d.n_h >= sp.window && d.n_w >= sp.window) vm.ssim = ssim(rec, ref, sp);
        report.views.push_back(vm);
      }
      report.finalize();
      report.psnr_3d = report.mean_psnr;
      report.ssim_3d = report.mean_ssim;
      out << report.to_table();
      if (!e3_json.empty()) {
        std::ofstream js(e3_json);
        if (!(js << report.to_json())) throw IoError(IoErrc::write_failed, "cannot write " + e3_json);
      }
      return 0;
    }
  } catch (const IoError& e) {
    err << "tiavox: io error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    err << "tiavox: config error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    err << "tiavox: invalid argument: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    err << "tiavox: error: " << e.what() << "\n";
    return 1;
  }
  err << "tiavox: usage error: no subcommand\n";
  return 2;
}

}  // namespace tiavox
