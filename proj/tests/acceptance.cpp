// Acceptance suite: one criterion per run ("acceptance 3") or all
// ("acceptance"). Prints one PASS/FAIL line per criterion; exit status is
// nonzero when any checked criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dk/conversion.hpp"
#include "dk/dataio.hpp"
#include "dk/geometry.hpp"
#include "dk/losses.hpp"
#include "dk/metrics.hpp"
#include "dk/refine.hpp"
#include "dk/synth.hpp"
#include "helpers.hpp"

using namespace dk;
using namespace dk::testing;

namespace {

struct Check {
  bool ok = true;
  std::string detail;

  void expect(bool condition, const std::string& what) {
    if (!condition) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------- criterion 1
// Disparity conversion reproduces the published spot values.
Check criterion_conversion() {
  Check c;
  const DepthRange plain(0.1, 100.0, 1.0);
  const double printed_s1[3] = {0.0023357, 0.0015015, 0.0010010};
  const double depths[3] = {30.0, 40.0, 50.0};
  for (int i = 0; i < 3; ++i) {
    const double x = depth_to_disparity(depths[i], plain);
    c.expect(std::abs(x - printed_s1[i]) < 5e-7,
             "s=1 depth " + fmt(depths[i]) + " -> " + fmt(x));
  }
  const DepthRange scaled(0.1, 100.0, 64.0);
  const double printed_s64[3] = {0.2125, 0.1591, 0.1271};
  for (int i = 0; i < 3; ++i) {
    const double x = depth_to_disparity(depths[i], scaled);
    c.expect(std::abs(x - printed_s64[i]) < 5e-4,
             "s=64 depth " + fmt(depths[i]) + " -> " + fmt(x));
  }
  return c;
}

// ---------------------------------------------------------------- criterion 2
// SILog scale invariance over 1000 random maps plus the hand case.
Check criterion_silog() {
  Check c;
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> log_c(std::log(0.01), std::log(100.0));
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const DepthMap pred = random_depth_map(32, 32, 10000 + i, 0.5, 80.0);
    const DepthMap gt = random_depth_map(32, 32, 20000 + i, 0.5, 80.0);
    const double scale = std::exp(log_c(rng));
    const double base = silog_image(pred, GroundTruth(gt));
    const double moved = silog_image(apply_scale(pred, scale), GroundTruth(gt));
    worst = std::max(worst, std::abs(moved - base));
  }
  c.expect(worst < 1e-10, "worst invariance drift " + fmt(worst));

  const DepthMap pred = DepthMap::create(1, 2, {1.0, std::exp(1.0)}, {1, 1});
  const DepthMap gt = DepthMap::create(1, 2, {1.0, 1.0}, {1, 1});
  const double hand = silog_image(pred, GroundTruth(gt));
  c.expect(std::abs(hand - 0.25) < 1e-12, "hand case " + fmt(hand));
  return c;
}

// ---------------------------------------------------------------- criterion 3
// Analytic gradients vs central finite differences on 50 random 8x8 scenes.
Check criterion_gradients() {
  Check c;
  struct Combo {
    bool ir, ds, tm, dd;
    const char* name;
  };
  const Combo combos[] = {
      {true, false, false, false, "ir"},   {false, true, false, false, "ds"},
      {false, false, true, false, "tm"},   {false, false, false, true, "dd"},
      {true, true, false, false, "ir+ds"}, {true, true, true, true, "all"},
  };

  std::vector<GradCheckScene> scenes;
  scenes.reserve(50);
  for (unsigned seed = 1; seed <= 50; ++seed) {
    scenes.push_back(make_gradcheck_scene(seed * 13 + 5));
  }

  for (const Combo& combo : combos) {
    long checked = 0, passed = 0;
    bool motion_ok = true;
    for (const GradCheckScene& gs : scenes) {
      const SceneInputs scene = gs.scene(combo.ir, combo.ds, combo.tm, combo.dd);
      const TermWeights w = TermWeights::ones();
      const LatentGradients g = latent_gradients(scene, gs.field, gs.motion, w);

      std::vector<std::uint8_t> mask(gs.field.u.size(), 1);
      if (combo.ir) {
        const DepthMap metric =
            map_to_depth(latent_to_disparity(gs.field), gs.range);
        mask = warp_image(gs.frame_next, metric,
                          motion_to_metric_rigid(gs.motion, gs.range),
                          gs.intrinsics)
                   .mask;
      }
      for (std::size_t i = 0; i < gs.field.u.size(); ++i) {
        if (!mask[i]) continue;
        const double fd = fd_latent(scene, gs.field, gs.motion, w, i, 1e-5);
        ++checked;
        if (rel_err(g.d_latent[i], fd) < 1e-4) ++passed;
      }
      for (int k = 0; k < 6; ++k) {
        const double fd = fd_motion(scene, gs.field, gs.motion, w, k, 1e-5);
        if (std::abs(fd) < 1e-9 && std::abs(g.d_motion[k]) < 1e-9) continue;
        if (rel_err(g.d_motion[k], fd) >= 1e-4) motion_ok = false;
      }
    }
    const double rate = checked ? static_cast<double>(passed) / checked : 0.0;
    c.expect(rate >= 0.99, std::string(combo.name) + " latent pass rate " +
                               fmt(rate));
    c.expect(motion_ok, std::string(combo.name) + " motion component failed");
  }
  return c;
}

// ---------------------------------------------------------------- criterion 4
// Joint depth/translation scaling leaves the photometric loss unchanged;
// the transform-supervision term breaks the tie.
Check criterion_scale_probe() {
  Check c;
  PlaneSceneSpec spec;
  spec.height = 48;
  spec.width = 64;
  spec.plane_depth = 10.0;
  spec.intrinsics = {90.0, 90.0, 31.5, 23.5};
  spec.ego.translation = Eigen::Vector3d(0.2, 0.1, 0.25);
  const PlaneScene scene = make_plane_scene(spec);
  const DepthRange range;  // defaults (0.1, 100, 32)

  for (double factor : {0.5, 2.0, 10.0}) {
    const ScaleProbeReport free_probe = scale_ambiguity_probe(
        scene.frame_k, scene.frame_next, scene.intrinsics, scene.ego,
        scene.depth_gt, factor, SsimConfig{}, false, range);
    c.expect(free_probe.delta_ir < 1e-6,
             "c=" + fmt(factor) + " dL_ir=" + fmt(free_probe.delta_ir));

    const ScaleProbeReport anchored = scale_ambiguity_probe(
        scene.frame_k, scene.frame_next, scene.intrinsics, scene.ego,
        scene.depth_gt, factor, SsimConfig{}, true, range);
    c.expect(anchored.total_scaled > anchored.total_base,
             "c=" + fmt(factor) + " transform term did not raise the total");
  }
  return c;
}

// ---------------------------------------------------------------- criterion 5
// Refinement efficacy on the bundled synthetic scene.
Check criterion_refine() {
  Check c;
  PlaneSceneSpec spec;
  spec.height = 48;
  spec.width = 64;
  spec.plane_depth = 10.0;
  spec.intrinsics = {90.0, 90.0, 31.5, 23.5};
  spec.ego.translation = Eigen::Vector3d(0.25, 0.12, 0.3);
  spec.ego.axis_angle = Eigen::Vector3d(0.002, -0.003, 0.001);
  const PlaneScene scene = make_plane_scene(spec);

  const DepthMap noisy = perturb_depth(scene.depth_gt, 0.2, 424242);
  auto rmse = [&](const DepthMap& d) {
    double se = 0.0;
    for (std::size_t i = 0; i < d.depth.size(); ++i) {
      const double diff = d.depth[i] - scene.depth_gt.depth[i];
      se += diff * diff;
    }
    return std::sqrt(se / d.depth.size());
  };
  const double rmse_init = rmse(noisy);

  RefineConfig cfg;
  cfg.range = DepthRange(0.5, 50.0, 4.0);
  cfg.use_ir = true;
  cfg.use_ds = true;
  cfg.max_iterations = 2000;
  const LatentField init = init_latent(noisy, cfg.range);
  const RefineResult photometric =
      refine_depth(scene.frame_k, scene.frame_next, scene.intrinsics,
                   scene.ego, nullptr, nullptr, init, cfg);
  const double rmse_photo = rmse(photometric.depth);
  c.expect(rmse_photo <= 0.5 * rmse_init,
           "ir+ds rmse " + fmt(rmse_init) + " -> " + fmt(rmse_photo));

  RefineConfig dd_cfg = cfg;
  dd_cfg.use_dd = true;
  const ErrorMap trusted = ErrorMap::zeros(spec.height, spec.width);
  const RefineResult with_dd =
      refine_depth(scene.frame_k, scene.frame_next, scene.intrinsics,
                   scene.ego, &scene.depth_gt, &trusted, init, dd_cfg);
  const double rmse_dd = rmse(with_dd.depth);
  c.expect(rmse_dd < 0.01 * spec.plane_depth,
           "ir+ds+dd rmse " + fmt(rmse_dd));
  return c;
}

// ---------------------------------------------------------------- criterion 6
// Geometry and file-format round trips, 1000 random instances each.
Check criterion_round_trips() {
  Check c;
  std::mt19937 rng(66);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  double worst_motion = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Eigen::Vector3d axis(unit(rng), unit(rng), unit(rng));
    axis.normalize();
    std::uniform_real_distribution<double> angle(0.0, M_PI - 1e-3);
    MotionParams m;
    m.axis_angle = axis * angle(rng);
    m.translation = Eigen::Vector3d(unit(rng), unit(rng), unit(rng)) * 10.0;
    const MotionParams back = rigid_to_motion(motion_to_rigid(m));
    worst_motion = std::max(
        worst_motion, (back.as_vector() - m.as_vector()).cwiseAbs().maxCoeff());
  }
  c.expect(worst_motion < 1e-9, "motion round trip " + fmt(worst_motion));

  const CameraIntrinsics intr{60.0, 55.0, 15.5, 11.5};
  double worst_depth = 0.0;
  bool projection_ok = true;
  for (int i = 0; i < 1000; ++i) {
    const DepthMap map = random_depth_map(8, 8, 40000 + i, 1.0, 60.0, 0.8);
    const SparseDepth sparse =
        project_points(back_project(map, intr), intr, 8, 8);
    if (sparse.samples.size() != map.valid_count()) projection_ok = false;
    for (const auto& s : sparse.samples) {
      if (!map.is_valid(s.row, s.col)) {
        projection_ok = false;
        continue;
      }
      worst_depth =
          std::max(worst_depth, std::abs(s.depth - map.at(s.row, s.col)));
    }
  }
  c.expect(projection_ok, "projection did not land on the source pixels");
  c.expect(worst_depth < 1e-9, "projection depth drift " + fmt(worst_depth));

  const auto dir = std::filesystem::temp_directory_path() / "depthkit_accept";
  std::filesystem::create_directories(dir);

  std::vector<Rigid3> poses;
  for (int i = 0; i < 1000; ++i) {
    Eigen::Vector3d axis(unit(rng), unit(rng), unit(rng));
    axis.normalize();
    std::uniform_real_distribution<double> angle(0.0, M_PI - 1e-3);
    MotionParams m;
    m.axis_angle = axis * angle(rng);
    m.translation = Eigen::Vector3d(unit(rng), unit(rng), unit(rng)) * 20.0;
    poses.push_back(motion_to_rigid(m));
  }
  const auto pose_path = (dir / "poses.txt").string();
  write_pose_file(pose_path, poses);
  const std::vector<Rigid3> loaded = read_pose_file(pose_path);
  double worst_pose = loaded.size() == poses.size() ? 0.0 : 1.0;
  for (std::size_t i = 0; i < poses.size() && i < loaded.size(); ++i) {
    worst_pose = std::max(
        worst_pose,
        (loaded[i].rotation - poses[i].rotation).cwiseAbs().maxCoeff());
    worst_pose = std::max(
        worst_pose,
        (loaded[i].translation - poses[i].translation).cwiseAbs().maxCoeff());
  }
  c.expect(worst_pose < 1e-9, "pose file round trip " + fmt(worst_pose));

  double worst_png = 0.0;
  const auto png_path = (dir / "depth.png").string();
  for (int i = 0; i < 1000; ++i) {
    const DepthMap map = random_depth_map(6, 6, 50000 + i, 0.01, 255.0, 0.9);
    write_depth_png16(png_path, map);
    const DepthMap back = read_depth_png16(png_path);
    for (std::size_t p = 0; p < map.depth.size(); ++p) {
      if (back.valid[p] != map.valid[p]) worst_png = 1.0;
      if (map.valid[p]) {
        worst_png = std::max(worst_png, std::abs(back.depth[p] - map.depth[p]));
      }
    }
  }
  c.expect(worst_png <= 1.0 / 512.0, "depth png round trip " + fmt(worst_png));
  return c;
}

// ---------------------------------------------------------------- criterion 7
// Multi-frame fusion: denser than a single frame, faithful, order-invariant.
Check criterion_fusion() {
  Check c;
  SparseFrameSpec spec;
  spec.frame_count = 3;
  const auto frames = make_sparse_plane_frames(spec);
  const SparseDepth fused = fuse_sparse_frames(frames, spec.intrinsics);

  c.expect(fused.samples.size() >= 2 * frames[0].first.samples.size(),
           "fused " + std::to_string(fused.samples.size()) + " vs single " +
               std::to_string(frames[0].first.samples.size()));

  double worst = 0.0;
  for (const auto& s : fused.samples) {
    worst = std::max(worst, std::abs(s.depth - spec.plane_depth));
  }
  c.expect(worst < 1e-3, "fused depth error " + fmt(worst));

  const SparseDepth permuted = fuse_sparse_frames(
      {frames[2], frames[0], frames[1]}, spec.intrinsics);
  bool identical = permuted.samples.size() == fused.samples.size();
  for (std::size_t i = 0; identical && i < fused.samples.size(); ++i) {
    identical = permuted.samples[i].row == fused.samples[i].row &&
                permuted.samples[i].col == fused.samples[i].col &&
                permuted.samples[i].depth == fused.samples[i].depth;
  }
  c.expect(identical, "fusion depends on frame order");
  return c;
}

// ---------------------------------------------------------------- criterion 8
// Median-scaling equivalences and the global scale statistics.
Check criterion_median_scaling() {
  Check c;
  for (double k : {0.5, 2.0, 28.027}) {
    const DepthMap gt = random_depth_map(24, 24, 88, 1.0, 60.0);
    const DepthMap pred = random_depth_map(24, 24, 89, 1.0, 60.0);
    const DepthMap misscaled = apply_scale(pred, k);

    const ImageMetrics u3_base = standard_metrics(
        apply_scale(pred, median_scale(pred, GroundTruth(gt))), GroundTruth(gt));
    const ImageMetrics u3_misscaled = standard_metrics(
        apply_scale(misscaled, median_scale(misscaled, GroundTruth(gt))),
        GroundTruth(gt));
    c.expect(std::abs(u3_base.abs_rel - u3_misscaled.abs_rel) < 1e-9,
             "k=" + fmt(k) + " absrel drift");
    c.expect(std::abs(u3_base.rmse - u3_misscaled.rmse) < 1e-9,
             "k=" + fmt(k) + " rmse drift");

    const DepthMap exact = apply_scale(gt, k);
    const ImageMetrics restored = standard_metrics(
        apply_scale(exact, median_scale(exact, GroundTruth(gt))),
        GroundTruth(gt));
    c.expect(restored.abs_rel < 1e-12, "k=" + fmt(k) + " exact-ratio absrel");
  }

  std::mt19937 rng(888);
  std::normal_distribution<double> ratio(28.027, 1.0);
  std::vector<DepthMap> preds, gts;
  preds.reserve(200);
  gts.reserve(200);
  for (int i = 0; i < 200; ++i) {
    preds.push_back(random_depth_map(8, 8, 90000 + i, 0.5, 3.0));
    gts.push_back(apply_scale(preds.back(), ratio(rng)));
  }
  std::vector<EvalPair> pairs;
  pairs.reserve(200);
  for (int i = 0; i < 200; ++i) {
    pairs.push_back(EvalPair{&preds[i], GroundTruth(gts[i])});
  }
  const ScaleStats stats = global_scale_statistics(pairs);
  c.expect(std::abs(stats.mean - 28.027) < 0.5,
           "recovered mean " + fmt(stats.mean));
  return c;
}

// ---------------------------------------------------------------- criterion 9
// Loss normalization fixed point under constant terms.
Check criterion_normalization() {
  Check c;
  NormalizerState state;
  LossBreakdown b;
  b.l_ir = 0.37;
  b.l_ds = 0.061;
  b.l_tm = 2.4;
  b.l_dd = 0.0093;
  double total = 0.0;
  for (int i = 0; i < 2000; ++i) total = total_loss(b, state);
  c.expect(std::abs(total - 4.0) < 1e-5, "total " + fmt(total));
  c.expect(std::abs(b.l_ir / state.m_ir - 1.0) < 1e-6, "ir normalizer");
  c.expect(std::abs(b.l_ds / state.m_ds - 1.0) < 1e-6, "ds normalizer");
  c.expect(std::abs(b.l_tm / state.m_tm - 1.0) < 1e-6, "tm normalizer");
  c.expect(std::abs(b.l_dd / state.m_dd - 1.0) < 1e-6, "dd normalizer");
  return c;
}

struct Criterion {
  int number;
  const char* title;
  std::function<Check()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "disparity conversion spot values", criterion_conversion},
      {2, "silog scale invariance", criterion_silog},
      {3, "analytic gradients vs finite differences", criterion_gradients},
      {4, "scale-ambiguity probe", criterion_scale_probe},
      {5, "refinement efficacy", criterion_refine},
      {6, "geometry and file round trips", criterion_round_trips},
      {7, "multi-frame sparse fusion", criterion_fusion},
      {8, "median-scaling equivalences", criterion_median_scaling},
      {9, "loss normalization fixed point", criterion_normalization},
  };

  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

  bool all_ok = true;
  for (const Criterion& criterion : criteria) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), criterion.number) ==
            selected.end()) {
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    Check result;
    try {
      result = criterion.run();
    } catch (const std::exception& e) {
      result.ok = false;
      result.detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("criterion %d (%s): %s [%.1fs]%s%s\n", criterion.number,
                criterion.title, result.ok ? "PASS" : "FAIL", seconds,
                result.detail.empty() ? "" : " -- ", result.detail.c_str());
    std::fflush(stdout);
    all_ok = all_ok && result.ok;
  }
  return all_ok ? 0 : 1;
}
