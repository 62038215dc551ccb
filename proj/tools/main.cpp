// Command-line surface over the library: conversion, warping, losses,
// evaluation, refinement, fusion, scale statistics, and synthetic scenes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <omp.h>

#include "dk/conversion.hpp"
#include "dk/dataio.hpp"
#include "dk/geometry.hpp"
#include "dk/losses.hpp"
#include "dk/metrics.hpp"
#include "dk/refine.hpp"
#include "dk/synth.hpp"

using namespace dk;

namespace {

std::vector<double> parse_csv(const std::string& text, std::size_t expected,
                              const std::string& what) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    values.push_back(std::stod(item));
  }
  if (values.size() != expected) {
    throw CLI::ValidationError(what + ": expected " + std::to_string(expected) +
                               " comma-separated values");
  }
  return values;
}

struct RangeFlags {
  std::string range = "0.1,100";
  double scale = 32.0;

  DepthRange parse() const {
    const auto v = parse_csv(range, 2, "--range");
    return DepthRange(v[0], v[1], scale);
  }

  void attach(CLI::App* app) {
    app->add_option("--range", range, "d_min,d_max in meters")
        ->capture_default_str();
    app->add_option("--scale", scale, "learning scale s")
        ->capture_default_str();
  }
};

struct LossFlags {
  std::string terms = "ir,ds";
  double alpha = 0.85;
  int window = 3;
  double c1 = 1e-4;
  double c2 = 9e-4;
  std::string smoothness = "edge_aware";

  void attach(CLI::App* app) {
    app->add_option("--loss-terms", terms, "subset of ir,ds,tm,dd")
        ->capture_default_str();
    app->add_option("--alpha", alpha, "SSIM weight in the photometric mix")
        ->capture_default_str();
    app->add_option("--window", window, "SSIM window (odd)")
        ->capture_default_str();
    app->add_option("--c1", c1, "SSIM stabilizer c1")->capture_default_str();
    app->add_option("--c2", c2, "SSIM stabilizer c2")->capture_default_str();
    app->add_option("--smoothness-mode", smoothness, "edge_aware or literal")
        ->check(CLI::IsMember({"edge_aware", "literal"}))
        ->capture_default_str();
  }

  SsimConfig ssim() const { return SsimConfig{window, c1, c2, alpha}; }

  SmoothnessMode mode() const {
    return smoothness == "literal" ? SmoothnessMode::kLiteral
                                   : SmoothnessMode::kEdgeAware;
  }

  void enables(bool& ir, bool& ds, bool& tm, bool& dd) const {
    ir = terms.find("ir") != std::string::npos;
    ds = terms.find("ds") != std::string::npos;
    tm = terms.find("tm") != std::string::npos;
    dd = terms.find("dd") != std::string::npos;
    if (!ir && !ds && !tm && !dd) {
      throw CLI::ValidationError("--loss-terms: no known term in '" + terms +
                                 "'");
    }
  }
};

// A frame pair plus its side data, from a manifest row or explicit paths.
struct SampleFlags {
  std::string manifest;
  int index = 0;
  std::string frame_k, frame_next;
  std::string intrinsics;
  std::string pose_file;
  int pose_index = 0;
  std::string dense_depth, error_map, sparse_gt;

  void attach(CLI::App* app) {
    app->add_option("--manifest", manifest, "manifest file");
    app->add_option("--index", index, "sample index within the manifest")
        ->capture_default_str();
    app->add_option("--frame-k", frame_k, "frame k image (explicit mode)");
    app->add_option("--frame-k1", frame_next, "frame k+1 image");
    app->add_option("--intrinsics", intrinsics, "fx,fy,cx,cy");
    app->add_option("--pose-file", pose_file, "ego-motion file");
    app->add_option("--pose-index", pose_index, "record within the pose file")
        ->capture_default_str();
    app->add_option("--dense-depth", dense_depth, "completed depth PNG");
    app->add_option("--error-map", error_map, "completion error PNG");
    app->add_option("--sparse-gt", sparse_gt, "sparse ground-truth depth PNG");
  }

  LoadedSample load() const {
    if (!manifest.empty()) {
      const auto samples = read_manifest(manifest);
      if (index < 0 || index >= static_cast<int>(samples.size())) {
        throw std::runtime_error("--index out of range, manifest has " +
                                 std::to_string(samples.size()) + " samples");
      }
      return load_sample(samples[index]);
    }
    if (frame_k.empty() || frame_next.empty() || intrinsics.empty() ||
        pose_file.empty()) {
      throw std::runtime_error(
          "either --manifest or all of --frame-k/--frame-k1/--intrinsics/"
          "--pose-file are required");
    }
    SamplePair pair;
    pair.image_k_path = frame_k;
    pair.image_next_path = frame_next;
    const auto k = parse_csv(intrinsics, 4, "--intrinsics");
    pair.intrinsics = {k[0], k[1], k[2], k[3]};
    pair.pose_file_path = pose_file;
    pair.pose_index = pose_index;
    const auto poses = read_pose_file(pose_file);
    if (pose_index < 0 || pose_index >= static_cast<int>(poses.size())) {
      throw std::runtime_error("--pose-index out of range");
    }
    pair.ego = poses[pose_index];
    if (!sparse_gt.empty()) pair.sparse_gt_path = sparse_gt;
    if (!dense_depth.empty()) pair.dense_depth_path = dense_depth;
    if (!error_map.empty()) pair.error_map_path = error_map;
    return load_sample(pair);
  }
};

void write_mask_png(const std::string& path,
                    const std::vector<std::uint8_t>& mask, int height,
                    int width) {
  ImageBuffer img = ImageBuffer::zeros(height, width, 1);
  for (std::size_t i = 0; i < mask.size(); ++i) img.data[i] = mask[i] ? 1.0 : 0.0;
  write_image_png(path, img);
}

std::string pred_path_for(const std::string& pred_dir,
                          const std::string& image_path) {
  const auto stem = std::filesystem::path(image_path).stem().string();
  return (std::filesystem::path(pred_dir) / (stem + ".png")).string();
}

// ------------------------------------------------------------------- convert
int run_convert(const RangeFlags& range_flags, const std::string& x_text,
                const std::string& depth_text, const std::string& in_map,
                const std::string& out_map, const std::string& to) {
  const DepthRange range = range_flags.parse();
  if (!x_text.empty()) {
    std::printf("%.9g\n", disparity_to_depth(std::stod(x_text), range));
    return 0;
  }
  if (!depth_text.empty()) {
    std::printf("%.9g\n", depth_to_disparity(std::stod(depth_text), range));
    return 0;
  }
  if (!in_map.empty()) {
    if (out_map.empty()) {
      throw std::runtime_error("--out is required with --in");
    }
    if (to == "depth") {
      // 16-bit disparity PNG (x*65535) in, metric depth PNG out.
      const ErrorMap raw = read_error_map(in_map);
      DisparityMap x;
      x.height = raw.height;
      x.width = raw.width;
      x.x = raw.err;
      write_depth_png16(out_map, map_to_depth(x, range));
    } else {
      const DepthMap depth = read_depth_png16(in_map);
      const DisparityMap x = map_to_disparity(depth, range);
      ErrorMap raw;
      raw.height = x.height;
      raw.width = x.width;
      raw.err = x.x;
      write_error_map(out_map, raw);
    }
    return 0;
  }
  throw std::runtime_error("one of --x, --depth, or --in is required");
}

// ---------------------------------------------------------------------- warp
int run_warp(const SampleFlags& sample_flags, const std::string& depth_path,
             const std::string& out_warped, const std::string& out_mask) {
  const LoadedSample sample = sample_flags.load();
  DepthMap depth;
  if (!depth_path.empty()) {
    depth = read_depth_png16(depth_path);
  } else if (sample.dense_depth) {
    depth = *sample.dense_depth;
  } else {
    throw std::runtime_error("warp needs --depth or a manifest dense-depth");
  }
  const WarpResult warp =
      warp_image(sample.image_next, depth, sample.ego, sample.intrinsics);
  write_image_png(out_warped, warp.warped);
  if (!out_mask.empty()) {
    write_mask_png(out_mask, warp.mask, depth.height, depth.width);
  }
  long in_count = 0;
  for (auto m : warp.mask) in_count += m != 0;
  std::printf("warped %ld/%zu pixels in bounds\n", in_count, warp.mask.size());
  return 0;
}

// -------------------------------------------------------------------- losses
int run_losses(const SampleFlags& sample_flags, const RangeFlags& range_flags,
               const LossFlags& loss_flags, const std::string& pred_path,
               const std::string& json_out) {
  const LoadedSample sample = sample_flags.load();
  const DepthRange range = range_flags.parse();

  DepthMap pred;
  if (!pred_path.empty()) {
    pred = read_depth_png16(pred_path);
  } else if (sample.dense_depth) {
    pred = *sample.dense_depth;
  } else {
    throw std::runtime_error("losses needs --pred or a manifest dense-depth");
  }

  SceneInputs scene;
  scene.frame_k = &sample.image_k;
  scene.frame_next = &sample.image_next;
  scene.intrinsics = sample.intrinsics;
  scene.ego = sample.ego;
  scene.range = range;
  scene.ssim = loss_flags.ssim();
  scene.smoothness = loss_flags.mode();
  loss_flags.enables(scene.use_ir, scene.use_ds, scene.use_tm, scene.use_dd);
  if (sample.dense_depth) scene.dense_gt = &*sample.dense_depth;
  if (sample.error_map) scene.error_map = &*sample.error_map;
  if (scene.use_dd && !scene.dense_gt) {
    throw std::runtime_error("dd term needs a dense completed depth input");
  }

  const DisparityMap x = map_to_disparity(pred, range);
  MotionParams motion = rigid_to_motion(sample.ego);
  motion.translation /= range.s();

  const LossBreakdown b = evaluate_losses(scene, x, motion);
  std::printf("l_ir %.9g\n", b.l_ir);
  std::printf("l_ds %.9g\n", b.l_ds);
  std::printf("l_tm %.9g\n", b.l_tm);
  std::printf("l_dd %.9g\n", b.l_dd);
  std::printf("contributing_pixels %ld\n", b.contributing_pixel_count);
  if (!json_out.empty()) {
    std::ofstream out(json_out);
    out << "{\n  \"l_ir\": " << b.l_ir << ",\n  \"l_ds\": " << b.l_ds
        << ",\n  \"l_tm\": " << b.l_tm << ",\n  \"l_dd\": " << b.l_dd
        << ",\n  \"contributing_pixels\": " << b.contributing_pixel_count
        << "\n}\n";
  }
  return 0;
}

// ---------------------------------------------------------------------- eval
int run_eval(const std::string& manifest, const std::string& pred_dir,
             const std::string& median_mode, bool pixel_pooled,
             const std::string& crop_text, const std::string& clamp_text,
             const std::string& gt_kind, const std::string& out_json,
             const std::string& out_text, int jobs) {
  if (jobs > 0) omp_set_num_threads(jobs);
  const auto samples = read_manifest(manifest);
  if (samples.empty()) throw std::runtime_error("manifest is empty");

  EvalOptions options;
  options.pixel_pooled = pixel_pooled;
  if (!crop_text.empty()) {
    const auto v = parse_csv(crop_text, 4, "--crop");
    options.crop = CropRect{static_cast<int>(v[0]), static_cast<int>(v[1]),
                            static_cast<int>(v[2]), static_cast<int>(v[3])};
  }
  if (!clamp_text.empty()) {
    const auto v = parse_csv(clamp_text, 2, "--clamp");
    options.clamp = std::make_pair(v[0], v[1]);
  }

  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(samples.size());
  std::vector<DepthMap> preds(samples.size());
  std::vector<DepthMap> gts(samples.size());
  std::vector<std::string> failures(samples.size());

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const std::string path = pred_path_for(pred_dir, samples[i].image_k_path);
      preds[i] = read_depth_png16(path);
      if (gt_kind == "dense") {
        if (!samples[i].dense_depth_path) {
          throw std::runtime_error("sample has no dense depth");
        }
        gts[i] = read_depth_png16(*samples[i].dense_depth_path);
      } else {
        if (!samples[i].sparse_gt_path) {
          throw std::runtime_error("sample has no sparse ground truth");
        }
        gts[i] = read_depth_png16(*samples[i].sparse_gt_path);
      }
      if (median_mode == "per-image") {
        preds[i] = apply_scale(
            preds[i], median_scale(preds[i], GroundTruth(gts[i]), options));
      }
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  }

  std::vector<EvalPair> pairs;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (failures[i].empty()) {
      pairs.push_back(EvalPair{&preds[i], GroundTruth(gts[i])});
      kept.push_back(i);
    }
  }

  bool any_failure = false;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!failures[i].empty()) {
      any_failure = true;
      std::fprintf(stderr, "image %zu: %s\n", i, failures[i].c_str());
    }
  }
  if (pairs.empty()) throw std::runtime_error("no evaluable images");

  if (median_mode == "global") {
    const ScaleStats stats = global_scale_statistics(pairs, options);
    for (std::size_t k = 0; k < kept.size(); ++k) {
      preds[kept[k]] = apply_scale(preds[kept[k]], stats.mean);
    }
    std::printf("global median scale %.9g (std %.9g)\n", stats.mean,
                stats.stddev);
  }

  MetricReport report;
  try {
    report = evaluate_dataset(pairs, options);
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  }
  const std::string text = report_text(report);
  std::fputs(text.c_str(), stdout);
  if (!out_text.empty()) {
    std::ofstream out(out_text);
    out << text;
  }
  if (!out_json.empty()) {
    std::ofstream out(out_json);
    out << report_json(report) << "\n";
  }
  return any_failure ? 1 : 0;
}

// -------------------------------------------------------------------- refine
int run_refine(const SampleFlags& sample_flags, const RangeFlags& range_flags,
               const LossFlags& loss_flags, const std::string& init_text,
               int iters, double step, double tol, const std::string& motion,
               bool no_normalize, const std::string& out_depth,
               const std::string& out_trace) {
  const LoadedSample sample = sample_flags.load();

  RefineConfig cfg;
  cfg.range = range_flags.parse();
  cfg.ssim = loss_flags.ssim();
  cfg.smoothness = loss_flags.mode();
  loss_flags.enables(cfg.use_ir, cfg.use_ds, cfg.use_tm, cfg.use_dd);
  cfg.max_iterations = iters;
  cfg.step = step;
  cfg.tolerance = tol;
  cfg.motion = motion == "joint" ? MotionHandling::kJointlyOptimized
                                 : MotionHandling::kFixedToGroundTruth;
  cfg.normalize_losses = !no_normalize;

  LatentField init;
  if (init_text.rfind("const:", 0) == 0) {
    init = init_latent(std::stod(init_text.substr(6)), sample.image_k.height,
                       sample.image_k.width);
  } else if (init_text.rfind("depth:", 0) == 0) {
    init = init_latent(read_depth_png16(init_text.substr(6)), cfg.range);
  } else if (init_text == "sparse") {
    if (!sample.sparse_gt) {
      throw std::runtime_error("--init sparse needs a manifest sparse-gt");
    }
    init = init_latent(*sample.sparse_gt, cfg.range);
  } else {
    throw std::runtime_error("--init must be const:<x>, depth:<path>, or sparse");
  }

  const DepthMap* dense_gt =
      sample.dense_depth ? &*sample.dense_depth : nullptr;
  const ErrorMap* err = sample.error_map ? &*sample.error_map : nullptr;
  if (cfg.use_dd && !dense_gt) {
    throw std::runtime_error("dd term needs a dense completed depth input");
  }

  const RefineResult result =
      refine_depth(sample.image_k, sample.image_next, sample.intrinsics,
                   sample.ego, dense_gt, err, init, cfg);

  write_depth_png16(out_depth, result.depth);
  if (!out_trace.empty()) write_trace_csv(out_trace, result.trace);

  const char* reason = result.trace.reason == StopReason::kConverged
                           ? "converged"
                           : result.trace.reason == StopReason::kMaxIterations
                                 ? "max_iter"
                                 : "diverged";
  std::printf("iterations %d, reason %s\n", result.trace.iteration_count,
              reason);
  if (!result.trace.iterations.empty()) {
    const auto& last = result.trace.iterations.back();
    std::printf("final l_ir %.9g l_ds %.9g l_tm %.9g l_dd %.9g total %.9g\n",
                last.losses.l_ir, last.losses.l_ds, last.losses.l_tm,
                last.losses.l_dd, last.total);
  }
  return result.trace.reason == StopReason::kDiverged ? 1 : 0;
}

// ---------------------------------------------------------------------- fuse
int run_fuse(const std::vector<std::string>& sparse_paths,
             const std::string& pose_path, const std::string& intr_text,
             const std::string& out_path, int jobs) {
  if (jobs > 0) omp_set_num_threads(jobs);
  const auto poses = read_pose_file(pose_path);
  if (poses.size() < sparse_paths.size()) {
    throw std::runtime_error("pose file has fewer records than frames");
  }
  const auto k = parse_csv(intr_text, 4, "--intrinsics");
  const CameraIntrinsics intr{k[0], k[1], k[2], k[3]};

  std::vector<std::pair<SparseDepth, Rigid3>> frames;
  for (std::size_t i = 0; i < sparse_paths.size(); ++i) {
    frames.emplace_back(to_sparse(read_depth_png16(sparse_paths[i])), poses[i]);
  }
  const SparseDepth fused = fuse_sparse_frames(frames, intr);
  write_depth_png16(out_path, to_depth_map(fused));
  std::printf("fused %zu samples from %zu frames\n", fused.samples.size(),
              frames.size());
  return 0;
}

// --------------------------------------------------------------- scale-stats
int run_scale_stats(const std::string& manifest, const std::string& pred_dir,
                    const std::string& gt_kind, int jobs) {
  if (jobs > 0) omp_set_num_threads(jobs);
  const auto samples = read_manifest(manifest);
  if (samples.empty()) throw std::runtime_error("manifest is empty");

  std::vector<DepthMap> preds(samples.size()), gts(samples.size());
  std::vector<std::string> failures(samples.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      preds[i] =
          read_depth_png16(pred_path_for(pred_dir, samples[i].image_k_path));
      const auto& gt_path = gt_kind == "dense" ? samples[i].dense_depth_path
                                               : samples[i].sparse_gt_path;
      if (!gt_path) {
        throw std::runtime_error("sample lacks the requested ground truth");
      }
      gts[i] = read_depth_png16(*gt_path);
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!failures[i].empty()) {
      throw std::runtime_error("image " + std::to_string(i) + ": " +
                               failures[i]);
    }
  }
  std::vector<EvalPair> pairs;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    pairs.push_back(EvalPair{&preds[i], GroundTruth(gts[i])});
  }
  const ScaleStats stats = global_scale_statistics(pairs);
  std::printf("images %zu\n", stats.per_image_ratios.size());
  std::printf("mean %.9g\n", stats.mean);
  std::printf("std %.9g\n", stats.stddev);

  // Text histogram over mean +- 3 std.
  const double lo = stats.mean - 3.0 * stats.stddev;
  const double hi = stats.mean + 3.0 * stats.stddev;
  const int bins = 15;
  std::vector<int> counts(bins, 0);
  for (double r : stats.per_image_ratios) {
    int b = hi > lo ? static_cast<int>((r - lo) / (hi - lo) * bins) : 0;
    b = std::max(0, std::min(bins - 1, b));
    ++counts[b];
  }
  for (int b = 0; b < bins; ++b) {
    std::printf("%8.3f | %s\n", lo + (b + 0.5) * (hi - lo) / bins,
                std::string(counts[b], '*').c_str());
  }
  return 0;
}

// --------------------------------------------------------------------- synth
int run_synth(const std::string& out_dir, int height, int width, double depth,
              const std::string& motion_text, unsigned seed, int channels,
              double noise) {
  std::filesystem::create_directories(out_dir);
  const auto dir = std::filesystem::path(out_dir);

  PlaneSceneSpec spec;
  spec.height = height;
  spec.width = width;
  spec.channels = channels;
  spec.plane_depth = depth;
  spec.texture_seed = seed;
  spec.intrinsics = {0.9 * width, 0.9 * width, (width - 1) * 0.5,
                     (height - 1) * 0.5};
  const auto m = parse_csv(motion_text, 6, "--motion");
  spec.ego.axis_angle = Eigen::Vector3d(m[0], m[1], m[2]);
  spec.ego.translation = Eigen::Vector3d(m[3], m[4], m[5]);

  const PlaneScene scene = make_plane_scene(spec);
  write_image_png((dir / "frame_k.png").string(), scene.frame_k);
  write_image_png((dir / "frame_k1.png").string(), scene.frame_next);
  write_depth_png16((dir / "depth_gt.png").string(), scene.depth_gt);
  write_depth_png16((dir / "seed_depth.png").string(),
                    perturb_depth(scene.depth_gt, noise, seed + 1));
  write_error_map((dir / "err_zero.png").string(),
                  ErrorMap::zeros(height, width));
  write_pose_file((dir / "poses.txt").string(), {scene.ego});

  std::ofstream manifest((dir / "manifest.txt").string());
  manifest.precision(12);
  manifest << "frame_k.png frame_k1.png " << spec.intrinsics.fx << ' '
           << spec.intrinsics.fy << ' ' << spec.intrinsics.cx << ' '
           << spec.intrinsics.cy
           << " poses.txt 0 depth_gt.png depth_gt.png err_zero.png\n";
  std::printf("wrote synthetic scene to %s\n", out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"depth estimation toolkit: geometry, losses, metrics, and "
               "direct refinement"};
  app.set_config("--config", "", "plain-text config file (flag = value)");
  app.require_subcommand(1);

  // convert
  auto* convert = app.add_subcommand("convert", "disparity <-> depth");
  RangeFlags convert_range;
  convert_range.attach(convert);
  std::string convert_x, convert_depth, convert_in, convert_out;
  std::string convert_to = "depth";
  convert->add_option("--x", convert_x, "disparity value to convert");
  convert->add_option("--depth", convert_depth, "depth value to convert");
  convert->add_option("--in", convert_in,
                      "input map PNG (disparity maps store x*65535, 16-bit)");
  convert->add_option("--out", convert_out, "output map PNG");
  convert->add_option("--to", convert_to, "map conversion target")
      ->check(CLI::IsMember({"depth", "disparity"}));

  // warp
  auto* warp = app.add_subcommand("warp", "inverse-warp frame k+1 into frame k");
  SampleFlags warp_sample;
  warp_sample.attach(warp);
  std::string warp_depth, warp_out = "warped.png", warp_mask;
  warp->add_option("--depth", warp_depth, "depth PNG for frame k");
  warp->add_option("--out-warped", warp_out, "output image PNG")
      ->capture_default_str();
  warp->add_option("--out-mask", warp_mask, "output validity mask PNG");

  // losses
  auto* losses = app.add_subcommand("losses", "print the loss breakdown");
  SampleFlags losses_sample;
  losses_sample.attach(losses);
  RangeFlags losses_range;
  losses_range.attach(losses);
  LossFlags losses_flags;
  losses_flags.terms = "ir,ds,tm,dd";
  losses_flags.attach(losses);
  std::string losses_pred, losses_json;
  losses->add_option("--pred", losses_pred, "predicted metric depth PNG");
  losses->add_option("--out-json", losses_json, "write the breakdown as JSON");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate predictions over a manifest");
  std::string eval_manifest, eval_pred_dir, eval_crop, eval_clamp;
  std::string eval_median = "off", eval_gt = "sparse";
  std::string eval_json, eval_text;
  bool eval_pooled = false;
  int eval_jobs = 0;
  eval->add_option("--manifest", eval_manifest)->required();
  eval->add_option("--pred-dir", eval_pred_dir,
                   "directory of <image stem>.png depth predictions")
      ->required();
  eval->add_option("--median-scale", eval_median, "per-image, global, or off")
      ->check(CLI::IsMember({"per-image", "global", "off"}))
      ->capture_default_str();
  eval->add_flag("--pixel-pooled", eval_pooled,
                 "pool pixels across images for the non-SILog metrics");
  eval->add_option("--crop", eval_crop, "top,bottom,left,right evaluation crop");
  eval->add_option("--clamp", eval_clamp, "min,max prediction clamp");
  eval->add_option("--gt", eval_gt, "sparse or dense ground truth")
      ->check(CLI::IsMember({"sparse", "dense"}))
      ->capture_default_str();
  eval->add_option("--out-json", eval_json, "write the report as JSON");
  eval->add_option("--out-text", eval_text, "write the report as text");
  eval->add_option("--jobs", eval_jobs, "parallel image jobs");

  // refine
  auto* refine = app.add_subcommand("refine", "direct dense depth refinement");
  SampleFlags refine_sample;
  refine_sample.attach(refine);
  RangeFlags refine_range;
  refine_range.attach(refine);
  LossFlags refine_flags;
  refine_flags.attach(refine);
  std::string refine_init = "const:0.5";
  std::string refine_motion = "fixed";
  std::string refine_out = "refined.png", refine_trace;
  int refine_iters = 2000;
  double refine_step = 1e-2, refine_tol = 1e-7;
  bool refine_no_normalize = false;
  refine->add_option("--init", refine_init, "const:<x>, depth:<path>, or sparse")
      ->capture_default_str();
  refine->add_option("--iters", refine_iters)->capture_default_str();
  refine->add_option("--step", refine_step)->capture_default_str();
  refine->add_option("--tol", refine_tol)->capture_default_str();
  refine->add_option("--motion", refine_motion, "fixed or joint")
      ->check(CLI::IsMember({"fixed", "joint"}))
      ->capture_default_str();
  refine->add_flag("--no-normalize", refine_no_normalize,
                   "optimize the raw sum instead of the normalized total");
  refine->add_option("--out-depth", refine_out, "refined depth PNG")
      ->capture_default_str();
  refine->add_option("--out-trace", refine_trace, "per-iteration CSV");

  // fuse
  auto* fuse = app.add_subcommand("fuse", "ego-motion fusion of sparse frames");
  std::vector<std::string> fuse_sparse;
  std::string fuse_poses, fuse_intr, fuse_out = "fused.png";
  int fuse_jobs = 0;
  fuse->add_option("--sparse", fuse_sparse, "sparse depth PNGs, frame order")
      ->required()
      ->expected(-1);
  fuse->add_option("--poses", fuse_poses,
                   "pose file; record i maps frame i into the reference")
      ->required();
  fuse->add_option("--intrinsics", fuse_intr, "fx,fy,cx,cy")->required();
  fuse->add_option("--out", fuse_out)->capture_default_str();
  fuse->add_option("--jobs", fuse_jobs, "parallel jobs");

  // scale-stats
  auto* stats = app.add_subcommand("scale-stats",
                                   "median-ratio statistics over a manifest");
  std::string stats_manifest, stats_pred_dir;
  std::string stats_gt = "sparse";
  int stats_jobs = 0;
  stats->add_option("--manifest", stats_manifest)->required();
  stats->add_option("--pred-dir", stats_pred_dir)->required();
  stats->add_option("--gt", stats_gt)
      ->check(CLI::IsMember({"sparse", "dense"}))
      ->capture_default_str();
  stats->add_option("--jobs", stats_jobs, "parallel jobs");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic plane scene");
  std::string synth_dir = "scene";
  std::string synth_motion = "0.002,-0.003,0.001,0.25,0.12,0.3";
  int synth_height = 48, synth_width = 64, synth_channels = 1;
  double synth_depth = 10.0, synth_noise = 0.2;
  unsigned synth_seed = 7;
  synth->add_option("--out-dir", synth_dir)->capture_default_str();
  synth->add_option("--height", synth_height)->capture_default_str();
  synth->add_option("--width", synth_width)->capture_default_str();
  synth->add_option("--depth", synth_depth, "plane depth in meters")
      ->capture_default_str();
  synth->add_option("--motion", synth_motion, "ax,ay,az,tx,ty,tz ego-motion")
      ->capture_default_str();
  synth->add_option("--channels", synth_channels)->capture_default_str();
  synth->add_option("--noise", synth_noise, "seed depth perturbation amplitude")
      ->capture_default_str();
  synth->add_option("--seed", synth_seed, "texture/noise seed")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (convert->parsed()) {
      return run_convert(convert_range, convert_x, convert_depth, convert_in,
                         convert_out, convert_to);
    }
    if (warp->parsed()) {
      return run_warp(warp_sample, warp_depth, warp_out, warp_mask);
    }
    if (losses->parsed()) {
      return run_losses(losses_sample, losses_range, losses_flags, losses_pred,
                        losses_json);
    }
    if (eval->parsed()) {
      return run_eval(eval_manifest, eval_pred_dir, eval_median, eval_pooled,
                      eval_crop, eval_clamp, eval_gt, eval_json, eval_text,
                      eval_jobs);
    }
    if (refine->parsed()) {
      return run_refine(refine_sample, refine_range, refine_flags, refine_init,
                        refine_iters, refine_step, refine_tol, refine_motion,
                        refine_no_normalize, refine_out, refine_trace);
    }
    if (fuse->parsed()) {
      return run_fuse(fuse_sparse, fuse_poses, fuse_intr, fuse_out, fuse_jobs);
    }
    if (stats->parsed()) {
      return run_scale_stats(stats_manifest, stats_pred_dir, stats_gt,
                             stats_jobs);
    }
    if (synth->parsed()) {
      return run_synth(synth_dir, synth_height, synth_width, synth_depth,
                       synth_motion, synth_seed, synth_channels, synth_noise);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
