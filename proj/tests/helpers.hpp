#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "dk/conversion.hpp"
#include "dk/geometry.hpp"
#include "dk/losses.hpp"
#include "dk/refine.hpp"
#include "dk/types.hpp"

namespace dk::testing {

inline ImageBuffer smooth_texture(int h, int w, int channels, unsigned seed,
                                  double min_wavelength = 3.0,
                                  double max_wavelength = 8.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ImageBuffer img = ImageBuffer::zeros(h, w, channels);
  const int harmonics = 5;
  for (int ch = 0; ch < channels; ++ch) {
    std::vector<double> omega(harmonics), dx(harmonics), dy(harmonics),
        phase(harmonics), amp(harmonics);
    double norm = 0.0;
    for (int i = 0; i < harmonics; ++i) {
      const double wl =
          min_wavelength + unit(rng) * (max_wavelength - min_wavelength);
      omega[i] = 2.0 * M_PI / wl;
      const double angle = unit(rng) * 2.0 * M_PI;
      dx[i] = std::cos(angle);
      dy[i] = std::sin(angle);
      phase[i] = unit(rng) * 2.0 * M_PI;
      amp[i] = 0.5 + 0.5 * unit(rng);
      norm += amp[i];
    }
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        double v = 0.0;
        for (int i = 0; i < harmonics; ++i) {
          v += amp[i] * std::sin(omega[i] * (dx[i] * c + dy[i] * r) + phase[i]);
        }
        img.at(r, c, ch) = 0.5 + 0.45 * v / norm;
      }
    }
  }
  return img;
}

inline DepthMap random_depth_map(int h, int w, unsigned seed, double lo = 1.0,
                                 double hi = 50.0, double valid_fraction = 1.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> depth(lo, hi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  DepthMap map;
  map.height = h;
  map.width = w;
  map.depth.resize(static_cast<std::size_t>(h) * w);
  map.valid.resize(map.depth.size());
  for (std::size_t i = 0; i < map.depth.size(); ++i) {
    map.depth[i] = depth(rng);
    map.valid[i] = unit(rng) <= valid_fraction;
    if (!map.valid[i]) map.depth[i] = 0.0;
  }
  return map;
}

// A randomized scene for finite-difference gradient checks. Every quantity
// with a kink within reach of the difference step (bilinear cell edges, image
// bounds, L1 and forward-difference zero crossings) is resampled away so the
// check probes the smooth regime.
struct GradCheckScene {
  ImageBuffer frame_k;
  ImageBuffer frame_next;
  CameraIntrinsics intrinsics;
  Rigid3 ego;
  DepthMap dense_gt;
  ErrorMap err;
  DepthRange range{0.5, 50.0, 4.0};
  LatentField field;
  MotionParams motion;

  SceneInputs scene(bool ir, bool ds, bool tm, bool dd) const {
    SceneInputs s;
    s.frame_k = &frame_k;
    s.frame_next = &frame_next;
    s.intrinsics = intrinsics;
    s.ego = ego;
    s.dense_gt = &dense_gt;
    s.error_map = &err;
    s.range = range;
    s.ssim.window = 3;
    s.use_ir = ir;
    s.use_ds = ds;
    s.use_tm = tm;
    s.use_dd = dd;
    return s;
  }
};

inline bool gradcheck_scene_ok(const GradCheckScene& s) {
  const DisparityMap x = latent_to_disparity(s.field);
  const DepthMap metric =
      map_to_depth(x, s.range);
  WarpCache cache;
  const Rigid3 rigid = motion_to_metric_rigid(s.motion, s.range);
  const WarpResult warp =
      warp_image(s.frame_next, metric, rigid, s.intrinsics, &cache);

  long masked_in = 0;
  const double margin = 5e-3;
  for (std::size_t i = 0; i < warp.mask.size(); ++i) {
    if (!warp.mask[i]) continue;
    ++masked_in;
    const double fu = cache.u[i] - std::floor(cache.u[i]);
    const double fv = cache.v[i] - std::floor(cache.v[i]);
    if (fu < margin || fu > 1.0 - margin) return false;
    if (fv < margin || fv > 1.0 - margin) return false;
    if (cache.u[i] < margin || cache.u[i] > s.frame_next.width - 1 - margin)
      return false;
    if (cache.v[i] < margin || cache.v[i] > s.frame_next.height - 1 - margin)
      return false;
    // L1 kink.
    for (int ch = 0; ch < s.frame_k.channels; ++ch) {
      if (std::abs(s.frame_k.data[i * s.frame_k.channels + ch] -
                   warp.warped.data[i * s.frame_k.channels + ch]) < 1e-4) {
        return false;
      }
    }
    // Dense-term kink (diff crossing zero).
    if (std::abs(1.0 / (s.range.a() * x.x[i] + s.range.b()) -
                 s.dense_gt.depth[i] / s.range.s()) < 1e-4) {
      return false;
    }
  }
  if (masked_in < static_cast<long>(warp.mask.size()) / 2) return false;
  // Forward-difference kinks of the smoothness term.
  for (int r = 0; r < x.height; ++r) {
    for (int c = 0; c < x.width; ++c) {
      if (c + 1 < x.width &&
          std::abs(x.at(r, c + 1) - x.at(r, c)) < 1e-4) {
        return false;
      }
      if (r + 1 < x.height &&
          std::abs(x.at(r + 1, c) - x.at(r, c)) < 1e-4) {
        return false;
      }
    }
  }
  return true;
}

inline GradCheckScene make_gradcheck_scene(unsigned seed, int h = 8, int w = 8) {
  for (unsigned attempt = 0; attempt < 200; ++attempt) {
    const unsigned s = seed + 1000003u * attempt;
    std::mt19937 rng(s);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    GradCheckScene scene;
    scene.frame_k = smooth_texture(h, w, 1, s + 1);
    scene.frame_next = smooth_texture(h, w, 1, s + 2);
    scene.intrinsics = {10.0, 10.0, (w - 1) * 0.5, (h - 1) * 0.5};

    MotionParams ego_motion;
    ego_motion.axis_angle =
        Eigen::Vector3d(unit(rng) - 0.5, unit(rng) - 0.5, unit(rng) - 0.5) *
        0.02;
    ego_motion.translation =
        Eigen::Vector3d(unit(rng) - 0.5, unit(rng) - 0.5, unit(rng) - 0.5) *
        0.2;
    scene.ego = motion_to_rigid(ego_motion);

    const double base_depth = 4.0 + 2.0 * unit(rng);
    DepthMap gt = DepthMap::constant(h, w, base_depth);
    for (auto& d : gt.depth) d *= 0.85 + 0.3 * unit(rng);
    scene.dense_gt = gt;

    scene.err = ErrorMap::zeros(h, w);
    for (auto& e : scene.err.err) e = 0.5 * unit(rng);

    scene.field.height = h;
    scene.field.width = w;
    scene.field.u.resize(static_cast<std::size_t>(h) * w);
    const double u0 = std::log(0.39 / 0.61);
    for (auto& u : scene.field.u) u = u0 + 0.4 * (unit(rng) - 0.5);

    MotionParams target = rigid_to_motion(scene.ego);
    target.translation /= scene.range.s();
    scene.motion = target;
    scene.motion.axis_angle +=
        Eigen::Vector3d(unit(rng) - 0.5, unit(rng) - 0.5, unit(rng) - 0.5) *
        0.01;
    scene.motion.translation +=
        Eigen::Vector3d(unit(rng) - 0.5, unit(rng) - 0.5, unit(rng) - 0.5) *
        0.01;

    if (gradcheck_scene_ok(scene)) return scene;
  }
  throw std::runtime_error("gradcheck scene sampling failed to converge");
}

// Central finite difference of weights·terms along one latent coordinate.
inline double fd_latent(const SceneInputs& scene, const LatentField& field,
                        const MotionParams& m, const TermWeights& w,
                        std::size_t index, double step = 1e-5) {
  auto eval = [&](double delta) {
    LatentField f = field;
    f.u[index] += delta;
    const LossBreakdown b =
        evaluate_losses(scene, latent_to_disparity(f), m);
    return w.ir * b.l_ir + w.ds * b.l_ds + w.tm * b.l_tm + w.dd * b.l_dd;
  };
  return (eval(step) - eval(-step)) / (2.0 * step);
}

inline double fd_motion(const SceneInputs& scene, const LatentField& field,
                        const MotionParams& m, const TermWeights& w,
                        int component, double step = 1e-5) {
  auto eval = [&](double delta) {
    MotionParams mm = m;
    if (component < 3) {
      mm.axis_angle[component] += delta;
    } else {
      mm.translation[component - 3] += delta;
    }
    const LossBreakdown b =
        evaluate_losses(scene, latent_to_disparity(field), mm);
    return w.ir * b.l_ir + w.ds * b.l_ds + w.tm * b.l_tm + w.dd * b.l_dd;
  };
  return (eval(step) - eval(-step)) / (2.0 * step);
}

inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace dk::testing
