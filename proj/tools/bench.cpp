// Timings of the parallel kernels against their serial reference
// implementations, with a max-deviation column as a sanity check.

#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include <omp.h>

#include "dk/conversion.hpp"
#include "dk/geometry.hpp"
#include "dk/losses.hpp"
#include "dk/reference.hpp"
#include "dk/synth.hpp"

using namespace dk;

namespace {

struct Timing {
  double parallel_ms = 0.0;
  double serial_ms = 0.0;
  double max_dev = 0.0;
};

template <typename ParallelFn, typename SerialFn, typename DevFn>
Timing time_pair(int repeats, ParallelFn&& parallel, SerialFn&& serial,
                 DevFn&& deviation) {
  Timing t;
  parallel();  // warm-up
  double start = omp_get_wtime();
  for (int i = 0; i < repeats; ++i) parallel();
  t.parallel_ms = (omp_get_wtime() - start) * 1000.0 / repeats;

  start = omp_get_wtime();
  for (int i = 0; i < repeats; ++i) serial();
  t.serial_ms = (omp_get_wtime() - start) * 1000.0 / repeats;

  t.max_dev = deviation();
  return t;
}

void report(const std::string& name, const Timing& t) {
  std::printf("%-24s %10.3f ms %10.3f ms %8.2fx   max dev %.2e\n", name.c_str(),
              t.parallel_ms, t.serial_ms,
              t.parallel_ms > 0 ? t.serial_ms / t.parallel_ms : 0.0, t.max_dev);
}

}  // namespace

int main(int argc, char** argv) {
  int height = 384, width = 512, repeats = 5;
  if (argc > 1) height = std::atoi(argv[1]);
  if (argc > 2) width = std::atoi(argv[2]);
  if (argc > 3) repeats = std::atoi(argv[3]);

  std::printf("kernel benchmark: %dx%d, %d repeats, %d threads\n", height,
              width, repeats, omp_get_max_threads());
  std::printf("%-24s %13s %13s %9s\n", "", "parallel", "serial", "speedup");

  PlaneSceneSpec spec;
  spec.height = height;
  spec.width = width;
  spec.intrinsics = {0.8 * width, 0.8 * width, (width - 1) * 0.5,
                     (height - 1) * 0.5};
  spec.ego.translation = Eigen::Vector3d(0.2, 0.1, 0.3);
  const PlaneScene scene = make_plane_scene(spec);

  std::mt19937 rng(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  DisparityMap x;
  x.height = height;
  x.width = width;
  x.x.resize(scene.frame_k.pixel_count());
  for (auto& v : x.x) v = 0.2 + 0.6 * unit(rng);

  const DepthRange range(0.5, 50.0, 4.0);
  const SsimConfig ssim_cfg;

  {
    WarpResult out;
    auto run = [&] {
      out = warp_image(scene.frame_next, scene.depth_gt, scene.ego,
                       scene.intrinsics);
    };
    WarpResult ref_out;
    auto run_ref = [&] {
      ref_out = ref::warp_image(scene.frame_next, scene.depth_gt, scene.ego,
                                scene.intrinsics);
    };
    auto dev = [&] {
      double worst = 0.0;
      for (std::size_t i = 0; i < out.warped.data.size(); ++i) {
        worst = std::max(worst,
                         std::abs(out.warped.data[i] - ref_out.warped.data[i]));
      }
      return worst;
    };
    report("warp_image", time_pair(repeats, run, run_ref, dev));
  }

  for (int window : {3, 7}) {
    SsimConfig cfg = ssim_cfg;
    cfg.window = window;
    ImageBuffer out, ref_out;
    auto run = [&] { out = ssim_map(scene.frame_k, scene.frame_next, cfg); };
    auto run_ref = [&] {
      ref_out = ref::ssim_map(scene.frame_k, scene.frame_next, cfg);
    };
    auto dev = [&] {
      double worst = 0.0;
      for (std::size_t i = 0; i < out.data.size(); ++i) {
        worst = std::max(worst, std::abs(out.data[i] - ref_out.data[i]));
      }
      return worst;
    };
    report("ssim_map w" + std::to_string(window),
           time_pair(repeats, run, run_ref, dev));
  }

  {
    WarpResult warp = warp_image(scene.frame_next, scene.depth_gt, scene.ego,
                                 scene.intrinsics);
    PixelLoss out, ref_out;
    auto run = [&] {
      out = image_reconstruction_loss(scene.frame_k, warp, ssim_cfg);
    };
    auto run_ref = [&] {
      ref_out = ref::image_reconstruction_loss(scene.frame_k, warp, ssim_cfg);
    };
    auto dev = [&] { return std::abs(out.value - ref_out.value); };
    report("image_reconstruction", time_pair(repeats, run, run_ref, dev));
  }

  {
    double out = 0.0, ref_out = 0.0;
    auto run = [&] {
      out = smoothness_loss(x, scene.frame_k, SmoothnessMode::kEdgeAware);
    };
    auto run_ref = [&] {
      ref_out =
          ref::smoothness_loss(x, scene.frame_k, SmoothnessMode::kEdgeAware);
    };
    auto dev = [&] { return std::abs(out - ref_out); };
    report("smoothness_loss", time_pair(repeats, run, run_ref, dev));
  }

  {
    DepthMap out, ref_out;
    auto run = [&] { out = map_to_depth(x, range); };
    auto run_ref = [&] { ref_out = ref::map_to_depth(x, range); };
    auto dev = [&] {
      double worst = 0.0;
      for (std::size_t i = 0; i < out.depth.size(); ++i) {
        worst = std::max(worst, std::abs(out.depth[i] - ref_out.depth[i]));
      }
      return worst;
    };
    report("map_to_depth", time_pair(repeats, run, run_ref, dev));
  }

  {
    ErrorMap err = ErrorMap::zeros(height, width);
    DepthMap pred = ref::map_to_depth(x, range);
    for (auto& d : pred.depth) d /= range.s();
    PixelLoss out, ref_out;
    auto run = [&] {
      out = dense_depth_loss(pred, scene.depth_gt, err, range);
    };
    auto run_ref = [&] {
      ref_out = ref::dense_depth_loss(pred, scene.depth_gt, err, range);
    };
    auto dev = [&] { return std::abs(out.value - ref_out.value); };
    report("dense_depth_loss", time_pair(repeats, run, run_ref, dev));
  }

  return 0;
}
