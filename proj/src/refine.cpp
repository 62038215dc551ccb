#include "dk/refine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "dk/conversion.hpp"
#include "dk/geometry.hpp"
#include "dk/metrics.hpp"

namespace dk {

namespace {

double logit(double x) {
  if (!(x > 0.0 && x < 1.0)) {
    throw std::out_of_range("latent init: disparity must lie inside (0,1)");
  }
  return std::log(x / (1.0 - x));
}

double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

double lower_median(std::vector<double> v) {
  const std::size_t k = (v.size() - 1) / 2;
  std::nth_element(v.begin(), v.begin() + k, v.end());
  return v[k];
}

double seed_logit(double depth, const DepthRange& range) {
  return logit(depth_to_disparity(depth, range));
}

}  // namespace

LatentField init_latent(double disparity, int height, int width) {
  LatentField f;
  f.height = height;
  f.width = width;
  f.u.assign(static_cast<std::size_t>(height) * width, logit(disparity));
  return f;
}

LatentField init_latent(const DepthMap& seed, const DepthRange& range) {
  LatentField f;
  f.height = seed.height;
  f.width = seed.width;
  f.u.resize(seed.pixel_count());
  std::vector<double> valid_depths;
  valid_depths.reserve(seed.pixel_count());
  for (std::size_t i = 0; i < seed.depth.size(); ++i) {
    if (seed.valid[i]) valid_depths.push_back(seed.depth[i]);
  }
  if (valid_depths.empty()) {
    throw std::invalid_argument("latent init: seed has no valid pixels");
  }
  const double fallback = seed_logit(lower_median(valid_depths), range);
  for (std::size_t i = 0; i < seed.depth.size(); ++i) {
    f.u[i] = seed.valid[i] ? seed_logit(seed.depth[i], range) : fallback;
  }
  return f;
}

LatentField init_latent(const SparseDepth& seed, const DepthRange& range) {
  if (seed.samples.empty()) {
    throw std::invalid_argument("latent init: sparse seed is empty");
  }
  LatentField f;
  f.height = seed.height;
  f.width = seed.width;
  std::vector<double> depths;
  depths.reserve(seed.samples.size());
  for (const auto& s : seed.samples) depths.push_back(s.depth);
  const double fallback = seed_logit(lower_median(std::move(depths)), range);
  f.u.assign(static_cast<std::size_t>(seed.height) * seed.width, fallback);
  for (const auto& s : seed.samples) {
    f.u[flat_index(s.row, s.col, seed.width)] = seed_logit(s.depth, range);
  }
  return f;
}

DisparityMap latent_to_disparity(const LatentField& field) {
  DisparityMap x;
  x.height = field.height;
  x.width = field.width;
  x.x.resize(field.u.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(field.u.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    x.x[i] = sigmoid(field.u[i]);
  }
  return x;
}

LatentGradients latent_gradients(const SceneInputs& scene,
                                 const LatentField& field,
                                 const MotionParams& m,
                                 const TermWeights& weights) {
  const DisparityMap x = latent_to_disparity(field);
  LossGradients g = loss_gradients(scene, x, m, weights);
  LatentGradients out;
  out.breakdown = std::move(g.breakdown);
  out.total = g.total;
  out.d_motion = g.d_motion;
  out.d_latent.resize(field.u.size());
  for (std::size_t i = 0; i < field.u.size(); ++i) {
    out.d_latent[i] = g.d_disparity[i] * x.x[i] * (1.0 - x.x[i]);
  }
  return out;
}

RefineResult refine_depth(const ImageBuffer& frame_k,
                          const ImageBuffer& frame_next,
                          const CameraIntrinsics& intr, const Rigid3& ego,
                          const DepthMap* dense_gt, const ErrorMap* err,
                          const LatentField& init, const RefineConfig& cfg) {
  if (!(cfg.use_ir || cfg.use_ds || cfg.use_tm || cfg.use_dd)) {
    throw std::invalid_argument("refine: no loss term enabled");
  }
  if (cfg.use_dd && !dense_gt) {
    throw std::invalid_argument("refine: dense term needs completed depth");
  }
  if (!(cfg.step > 0.0) || !(cfg.tolerance > 0.0)) {
    throw std::invalid_argument("refine: step and tolerance must be positive");
  }

  SceneInputs scene;
  scene.frame_k = &frame_k;
  scene.frame_next = &frame_next;
  scene.intrinsics = intr;
  scene.ego = ego;
  scene.dense_gt = dense_gt;
  scene.error_map = err;
  scene.range = cfg.range;
  scene.ssim = cfg.ssim;
  scene.smoothness = cfg.smoothness;
  scene.use_ir = cfg.use_ir;
  scene.use_ds = cfg.use_ds;
  scene.use_tm = cfg.use_tm;
  scene.use_dd = cfg.use_dd;

  const std::size_t n = init.u.size();
  LatentField field = init;
  MotionParams target = rigid_to_motion(ego);
  target.translation /= cfg.range.s();
  MotionParams motion = target;

  // Adaptive-moment state.
  std::vector<double> m1(n, 0.0), m2(n, 0.0);
  Eigen::Matrix<double, 6, 1> mm1 = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 1> mm2 = Eigen::Matrix<double, 6, 1>::Zero();

  NormalizerState norm_state;
  norm_state.beta = cfg.normalizer_beta;

  RefineResult result;
  result.trace.reason = StopReason::kMaxIterations;

  LatentField prev_field = field;
  MotionParams prev_motion = motion;

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    const DisparityMap x = latent_to_disparity(field);

    LossGradients g;
    try {
      if (cfg.normalize_losses) {
        g = loss_gradients(scene, x, motion, norm_state);
      } else {
        g = loss_gradients(scene, x, motion, TermWeights::ones());
      }
    } catch (const std::domain_error&) {
      // Warp mask collapsed mid-optimization.
      result.trace.reason = StopReason::kDiverged;
      result.trace.diverged_at = iter;
      field = prev_field;
      motion = prev_motion;
      break;
    }

    if (!std::isfinite(g.total)) {
      result.trace.reason = StopReason::kDiverged;
      result.trace.diverged_at = iter;
      field = prev_field;
      motion = prev_motion;
      break;
    }

    result.trace.iterations.push_back({g.breakdown, g.total});

    // Relative decrease over the trailing window.
    const int t = iter;
    if (t >= cfg.tolerance_window) {
      const double before =
          result.trace.iterations[t - cfg.tolerance_window].total;
      const double now = g.total;
      const double rel =
          std::abs(before - now) / std::max(std::abs(before), 1e-300);
      if (rel < cfg.tolerance) {
        result.trace.reason = StopReason::kConverged;
        break;
      }
    }

    prev_field = field;
    prev_motion = motion;

    const double bias1 = 1.0 - std::pow(cfg.beta1, iter + 1);
    const double bias2 = 1.0 - std::pow(cfg.beta2, iter + 1);
    const std::ptrdiff_t nn = static_cast<std::ptrdiff_t>(n);
    // Chain to the latent: dx/du = x(1-x).
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < nn; ++i) {
      const double grad = g.d_disparity[i] * x.x[i] * (1.0 - x.x[i]);
      m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * grad;
      m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * grad * grad;
      const double mhat = m1[i] / bias1;
      const double vhat = m2[i] / bias2;
      field.u[i] -= cfg.step * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }

    if (cfg.motion == MotionHandling::kJointlyOptimized) {
      for (int k = 0; k < 6; ++k) {
        const double grad = g.d_motion[k];
        mm1[k] = cfg.beta1 * mm1[k] + (1.0 - cfg.beta1) * grad;
        mm2[k] = cfg.beta2 * mm2[k] + (1.0 - cfg.beta2) * grad * grad;
        const double mhat = mm1[k] / bias1;
        const double vhat = mm2[k] / bias2;
        const double delta = cfg.step * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        if (k < 3) {
          motion.axis_angle[k] -= delta;
        } else {
          motion.translation[k - 3] -= delta;
        }
      }
    }
  }

  result.trace.iteration_count =
      static_cast<int>(result.trace.iterations.size());
  result.depth = map_to_depth(latent_to_disparity(field), cfg.range);
  result.motion = motion;
  return result;
}

ScaleProbeReport scale_ambiguity_probe(const ImageBuffer& frame_k,
                                       const ImageBuffer& frame_next,
                                       const CameraIntrinsics& intr,
                                       const Rigid3& ego, const DepthMap& depth,
                                       double c, const SsimConfig& ssim,
                                       bool include_tm, const DepthRange& range) {
  if (!(c > 0.0)) {
    throw std::invalid_argument("scale probe: factor must be positive");
  }
  ScaleProbeReport report;
  report.c = c;
  report.tm_enabled = include_tm;

  const WarpResult base = warp_image(frame_next, depth, ego, intr);
  report.l_ir_base = image_reconstruction_loss(frame_k, base, ssim).value;

  Rigid3 scaled_ego = ego;
  scaled_ego.translation *= c;
  const DepthMap scaled_depth = apply_scale(depth, c);
  const WarpResult scaled = warp_image(frame_next, scaled_depth, scaled_ego, intr);
  report.l_ir_scaled = image_reconstruction_loss(frame_k, scaled, ssim).value;
  report.delta_ir = std::abs(report.l_ir_scaled - report.l_ir_base);

  report.total_base = report.l_ir_base;
  report.total_scaled = report.l_ir_scaled;
  if (include_tm) {
    MotionParams pred = rigid_to_motion(scaled_ego);
    pred.translation /= range.s();
    report.total_scaled += transform_supervision_loss(pred, ego, range);
    MotionParams base_pred = rigid_to_motion(ego);
    base_pred.translation /= range.s();
    report.total_base += transform_supervision_loss(base_pred, ego, range);
  }
  return report;
}

void write_trace_csv(const std::string& path, const RefineTrace& trace) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open trace file: " + path);
  }
  out << "iter,l_ir,l_ds,l_tm,l_dd,total\n";
  out.precision(12);
  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    const auto& rec = trace.iterations[i];
    out << i << ',' << rec.losses.l_ir << ',' << rec.losses.l_ds << ','
        << rec.losses.l_tm << ',' << rec.losses.l_dd << ',' << rec.total
        << '\n';
  }
}

}  // namespace dk
