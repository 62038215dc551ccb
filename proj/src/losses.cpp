#include "dk/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Geometry>

#include "dk/conversion.hpp"

namespace dk {

namespace {

double sign_of(double v) { return (v > 0.0) - (v < 0.0); }

// Truncated box sum, horizontal running window then vertical gather.
void box_sum(const double* in, double* out, double* tmp, int h, int w,
             int win) {
  const int half = win / 2;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < h; ++r) {
    const double* row = in + static_cast<std::size_t>(r) * w;
    double* trow = tmp + static_cast<std::size_t>(r) * w;
    double s = 0.0;
    const int lead = std::min(half, w - 1);
    for (int c = 0; c <= lead; ++c) s += row[c];
    for (int c = 0; c < w; ++c) {
      trow[c] = s;
      const int add = c + half + 1;
      if (add < w) s += row[add];
      const int sub = c - half;
      if (sub >= 0) s -= row[sub];
    }
  }
#pragma omp parallel for schedule(static)
  for (int r = 0; r < h; ++r) {
    double* orow = out + static_cast<std::size_t>(r) * w;
    std::fill(orow, orow + w, 0.0);
    const int r0 = std::max(0, r - half);
    const int r1 = std::min(h - 1, r + half);
    for (int rr = r0; rr <= r1; ++rr) {
      const double* trow = tmp + static_cast<std::size_t>(rr) * w;
      for (int c = 0; c < w; ++c) orow[c] += trow[c];
    }
  }
}

// Box-filtered window sums of both images, their squares, their product,
// and the valid-pixel count. Layout: per-channel planes of h*w.
struct SsimSums {
  int height = 0, width = 0, channels = 1, window = 3;
  std::vector<double> cnt;
  std::vector<double> sa, sb, saa, sbb, sab;
};

SsimSums compute_ssim_sums(const ImageBuffer& a, const ImageBuffer& b,
                           const std::vector<std::uint8_t>* mask,
                           const SsimConfig& cfg) {
  const int h = a.height, w = a.width, ch = a.channels;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  SsimSums s;
  s.height = h;
  s.width = w;
  s.channels = ch;
  s.window = cfg.window;
  s.cnt.resize(hw);
  s.sa.resize(hw * ch);
  s.sb.resize(hw * ch);
  s.saa.resize(hw * ch);
  s.sbb.resize(hw * ch);
  s.sab.resize(hw * ch);

  std::vector<double> plane(hw), tmp(hw);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(hw);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    plane[i] = (!mask || (*mask)[i]) ? 1.0 : 0.0;
  }
  box_sum(plane.data(), s.cnt.data(), tmp.data(), h, w, cfg.window);

  std::vector<double> field(hw);
  for (int c = 0; c < ch; ++c) {
    auto fill = [&](auto&& value) {
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t i = 0; i < n; ++i) {
        field[i] = plane[i] * value(static_cast<std::size_t>(i));
      }
    };
    fill([&](std::size_t i) { return a.data[i * ch + c]; });
    box_sum(field.data(), s.sa.data() + c * hw, tmp.data(), h, w, cfg.window);
    fill([&](std::size_t i) { return a.data[i * ch + c] * a.data[i * ch + c]; });
    box_sum(field.data(), s.saa.data() + c * hw, tmp.data(), h, w, cfg.window);
    fill([&](std::size_t i) { return b.data[i * ch + c]; });
    box_sum(field.data(), s.sb.data() + c * hw, tmp.data(), h, w, cfg.window);
    fill([&](std::size_t i) { return b.data[i * ch + c] * b.data[i * ch + c]; });
    box_sum(field.data(), s.sbb.data() + c * hw, tmp.data(), h, w, cfg.window);
    fill([&](std::size_t i) { return a.data[i * ch + c] * b.data[i * ch + c]; });
    box_sum(field.data(), s.sab.data() + c * hw, tmp.data(), h, w, cfg.window);
  }
  return s;
}

struct CenterStats {
  double n, mu_a, mu_b, a1, a2, b1, b2, ssim;
};

inline CenterStats center_stats(const SsimSums& s, std::size_t i, int channel,
                                const SsimConfig& cfg) {
  const std::size_t hw = static_cast<std::size_t>(s.height) * s.width;
  const std::size_t k = channel * hw + i;
  CenterStats cs;
  cs.n = s.cnt[i];
  const double inv = 1.0 / cs.n;
  cs.mu_a = s.sa[k] * inv;
  cs.mu_b = s.sb[k] * inv;
  const double var_a = s.saa[k] * inv - cs.mu_a * cs.mu_a;
  const double var_b = s.sbb[k] * inv - cs.mu_b * cs.mu_b;
  const double cov = s.sab[k] * inv - cs.mu_a * cs.mu_b;
  cs.a1 = 2.0 * cs.mu_a * cs.mu_b + cfg.c1;
  cs.a2 = 2.0 * cov + cfg.c2;
  cs.b1 = cs.mu_a * cs.mu_a + cs.mu_b * cs.mu_b + cfg.c1;
  cs.b2 = var_a + var_b + cfg.c2;
  cs.ssim = (cs.a1 * cs.a2) / (cs.b1 * cs.b2);
  return cs;
}

void check_ssim_inputs(const ImageBuffer& a, const ImageBuffer& b,
                       const SsimConfig& cfg) {
  if (a.height != b.height || a.width != b.width || a.channels != b.channels) {
    throw std::invalid_argument("ssim: image dimensions differ");
  }
  if (cfg.window < 3 || cfg.window % 2 == 0) {
    throw std::invalid_argument("ssim: window must be odd and >= 3");
  }
  if (!(cfg.c1 > 0.0) || !(cfg.c2 > 0.0)) {
    throw std::invalid_argument("ssim: stabilizers must be positive");
  }
}

ImageBuffer ssim_from_sums(const SsimSums& s, const std::vector<std::uint8_t>* mask,
                           const SsimConfig& cfg) {
  ImageBuffer out = ImageBuffer::zeros(s.height, s.width, 1);
  const std::size_t hw = static_cast<std::size_t>(s.height) * s.width;
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(hw);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (mask && !(*mask)[i]) continue;
    double acc = 0.0;
    for (int c = 0; c < s.channels; ++c) {
      acc += center_stats(s, i, c, cfg).ssim;
    }
    out.data[i] = acc / s.channels;
  }
  return out;
}

}  // namespace

ImageBuffer ssim_map(const ImageBuffer& a, const ImageBuffer& b,
                     const SsimConfig& cfg) {
  check_ssim_inputs(a, b, cfg);
  const SsimSums sums = compute_ssim_sums(a, b, nullptr, cfg);
  return ssim_from_sums(sums, nullptr, cfg);
}

ImageBuffer ssim_map(const ImageBuffer& a, const ImageBuffer& b,
                     const std::vector<std::uint8_t>& mask,
                     const SsimConfig& cfg) {
  check_ssim_inputs(a, b, cfg);
  if (mask.size() != a.pixel_count()) {
    throw std::invalid_argument("ssim: mask size mismatch");
  }
  const SsimSums sums = compute_ssim_sums(a, b, &mask, cfg);
  return ssim_from_sums(sums, &mask, cfg);
}

namespace {

// Shared forward path of L_ir; keeps the window sums alive for backprop.
PixelLoss ir_eval(const ImageBuffer& image, const ImageBuffer& warped,
                  const std::vector<std::uint8_t>& mask, const SsimConfig& cfg,
                  SsimSums* keep_sums) {
  check_ssim_inputs(image, warped, cfg);
  if (mask.size() != image.pixel_count()) {
    throw std::invalid_argument("image reconstruction: mask size mismatch");
  }
  const int h = image.height, w = image.width, ch = image.channels;
  const std::size_t hw = static_cast<std::size_t>(h) * w;

  long n = 0;
  for (std::size_t i = 0; i < hw; ++i) n += mask[i] != 0;
  if (n == 0) {
    throw std::domain_error("image reconstruction: empty mask");
  }

  SsimSums sums = compute_ssim_sums(image, warped, &mask, cfg);
  const ImageBuffer ssim = ssim_from_sums(sums, &mask, cfg);

  PixelLoss out;
  out.n = n;
  out.per_pixel.assign(hw, 0.0);
  std::vector<double> row_sums(h, 0.0);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < h; ++r) {
    double acc = 0.0;
    for (int c = 0; c < w; ++c) {
      const std::size_t i = flat_index(r, c, w);
      if (!mask[i]) continue;
      double l1 = 0.0;
      for (int k = 0; k < ch; ++k) {
        l1 += std::abs(image.data[i * ch + k] - warped.data[i * ch + k]);
      }
      l1 /= ch;
      const double v =
          cfg.alpha * 0.5 * (1.0 - ssim.data[i]) + (1.0 - cfg.alpha) * l1;
      out.per_pixel[i] = v;
      acc += v;
    }
    row_sums[r] = acc;
  }
  double total = 0.0;
  for (double v : row_sums) total += v;
  out.value = total / n;
  if (keep_sums) *keep_sums = std::move(sums);
  return out;
}

}  // namespace

PixelLoss image_reconstruction_loss(const ImageBuffer& image,
                                    const WarpResult& warped,
                                    const SsimConfig& cfg) {
  return ir_eval(image, warped.warped, warped.mask, cfg, nullptr);
}

namespace {

// Channel-averaged absolute forward difference of the image.
inline double image_grad_x(const ImageBuffer& img, int r, int c) {
  double g = 0.0;
  for (int k = 0; k < img.channels; ++k) {
    g += std::abs(img.at(r, c + 1, k) - img.at(r, c, k));
  }
  return g / img.channels;
}

inline double image_grad_y(const ImageBuffer& img, int r, int c) {
  double g = 0.0;
  for (int k = 0; k < img.channels; ++k) {
    g += std::abs(img.at(r + 1, c, k) - img.at(r, c, k));
  }
  return g / img.channels;
}

double smoothness_eval(const DisparityMap& x, const ImageBuffer& image,
                       SmoothnessMode mode, double grad_scale, double* grad) {
  if (x.height != image.height || x.width != image.width) {
    throw std::invalid_argument("smoothness: dimensions differ");
  }
  const int h = x.height, w = x.width;
  const double inv_n = 1.0 / (static_cast<double>(h) * w);

  std::vector<double> row_sums(h, 0.0);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < h; ++r) {
    double acc = 0.0;
    for (int c = 0; c < w; ++c) {
      if (c + 1 < w) {
        const double g = x.at(r, c + 1) - x.at(r, c);
        const double e = (mode == SmoothnessMode::kEdgeAware)
                             ? std::exp(-image_grad_x(image, r, c))
                             : std::exp(-std::abs(g));
        acc += std::abs(g) * e;
      }
      if (r + 1 < h) {
        const double g = x.at(r + 1, c) - x.at(r, c);
        const double e = (mode == SmoothnessMode::kEdgeAware)
                             ? std::exp(-image_grad_y(image, r, c))
                             : std::exp(-std::abs(g));
        acc += std::abs(g) * e;
      }
    }
    row_sums[r] = acc;
  }
  double total = 0.0;
  for (double v : row_sums) total += v;

  if (grad) {
    // d(|g| e^{-|g|})/dg = sign(g) e^{-|g|} (1 - |g|) in literal mode.
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        if (c + 1 < w) {
          const double g = x.at(r, c + 1) - x.at(r, c);
          double d;
          if (mode == SmoothnessMode::kEdgeAware) {
            d = sign_of(g) * std::exp(-image_grad_x(image, r, c));
          } else {
            d = sign_of(g) * std::exp(-std::abs(g)) * (1.0 - std::abs(g));
          }
          d *= grad_scale * inv_n;
          grad[flat_index(r, c + 1, w)] += d;
          grad[flat_index(r, c, w)] -= d;
        }
        if (r + 1 < h) {
          const double g = x.at(r + 1, c) - x.at(r, c);
          double d;
          if (mode == SmoothnessMode::kEdgeAware) {
            d = sign_of(g) * std::exp(-image_grad_y(image, r, c));
          } else {
            d = sign_of(g) * std::exp(-std::abs(g)) * (1.0 - std::abs(g));
          }
          d *= grad_scale * inv_n;
          grad[flat_index(r + 1, c, w)] += d;
          grad[flat_index(r, c, w)] -= d;
        }
      }
    }
  }
  return total * inv_n;
}

}  // namespace

double smoothness_loss(const DisparityMap& x, const ImageBuffer& image,
                       SmoothnessMode mode) {
  return smoothness_eval(x, image, mode, 0.0, nullptr);
}

double transform_supervision_loss(const MotionParams& pred, const Rigid3& gt,
                                  const DepthRange& range) {
  MotionParams target = rigid_to_motion(gt);
  target.translation /= range.s();
  return (pred.as_vector() - target.as_vector()).squaredNorm();
}

namespace {

double dd_eval(const DepthMap& pred_scaled, const DepthMap& dense_gt,
               const double* err, const DepthRange& range, double grad_scale,
               double* grad, PixelLoss* out) {
  if (pred_scaled.height != dense_gt.height ||
      pred_scaled.width != dense_gt.width) {
    throw std::invalid_argument("dense depth loss: dimensions differ");
  }
  const int h = pred_scaled.height, w = pred_scaled.width;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  const double inv_s = 1.0 / range.s();

  if (out) out->per_pixel.assign(hw, 0.0);

  std::vector<double> row_sums(h, 0.0);
  std::vector<long> row_counts(h, 0);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < h; ++r) {
    double acc = 0.0;
    long cnt = 0;
    for (int c = 0; c < w; ++c) {
      const std::size_t i = flat_index(r, c, w);
      if (!dense_gt.valid[i] || !pred_scaled.valid[i]) continue;
      const double target = dense_gt.depth[i] * inv_s;
      const double diff = pred_scaled.depth[i] - target;
      const double trust = 1.0 - (err ? err[i] : 0.0);
      const double v = trust * diff * diff / target;
      if (out) out->per_pixel[i] = v;
      acc += v;
      ++cnt;
    }
    row_sums[r] = acc;
    row_counts[r] = cnt;
  }
  double total = 0.0;
  long n = 0;
  for (int r = 0; r < h; ++r) {
    total += row_sums[r];
    n += row_counts[r];
  }
  if (n == 0) {
    throw std::domain_error("dense depth loss: empty co-valid set");
  }
  const double value = total / n;

  if (grad) {
    const double scale = grad_scale / n;
#pragma omp parallel for schedule(static)
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const std::size_t i = flat_index(r, c, w);
        if (!dense_gt.valid[i] || !pred_scaled.valid[i]) continue;
        const double target = dense_gt.depth[i] * inv_s;
        const double diff = pred_scaled.depth[i] - target;
        const double trust = 1.0 - (err ? err[i] : 0.0);
        grad[i] += scale * 2.0 * trust * diff / target;
      }
    }
  }
  if (out) {
    out->value = value;
    out->n = n;
  }
  return value;
}

}  // namespace

PixelLoss dense_depth_loss(const DepthMap& pred_scaled, const DepthMap& dense_gt,
                           const ErrorMap& err, const DepthRange& range) {
  if (err.height != dense_gt.height || err.width != dense_gt.width) {
    throw std::invalid_argument("dense depth loss: error map dimensions differ");
  }
  PixelLoss out;
  dd_eval(pred_scaled, dense_gt, err.err.data(), range, 0.0, nullptr, &out);
  return out;
}

namespace {

double seed_weight(double term, double& magnitude, bool per_batch) {
  if (!(term > 0.0)) return 0.0;
  if (per_batch) return 1.0 / term;
  if (magnitude == 0.0) magnitude = term;
  return 1.0 / magnitude;
}

}  // namespace

TermWeights normalizer_weights(const LossBreakdown& b, NormalizerState& state) {
  TermWeights w;
  w.ir = seed_weight(b.l_ir, state.m_ir, state.per_batch);
  w.ds = seed_weight(b.l_ds, state.m_ds, state.per_batch);
  w.tm = seed_weight(b.l_tm, state.m_tm, state.per_batch);
  w.dd = seed_weight(b.l_dd, state.m_dd, state.per_batch);
  return w;
}

void update_normalizers(const LossBreakdown& b, NormalizerState& state) {
  auto ema = [&state](double term, double& m) {
    if (!(term > 0.0)) return;
    m = (m == 0.0) ? term : state.beta * m + (1.0 - state.beta) * term;
  };
  ema(b.l_ir, state.m_ir);
  ema(b.l_ds, state.m_ds);
  ema(b.l_tm, state.m_tm);
  ema(b.l_dd, state.m_dd);
}

double total_loss(const LossBreakdown& b, NormalizerState& state) {
  const TermWeights w = normalizer_weights(b, state);
  const double total =
      w.ir * b.l_ir + w.ds * b.l_ds + w.tm * b.l_tm + w.dd * b.l_dd;
  update_normalizers(b, state);
  return total;
}

Rigid3 motion_to_metric_rigid(const MotionParams& m, const DepthRange& range) {
  MotionParams metric = m;
  metric.translation *= range.s();
  return motion_to_rigid(metric);
}

namespace {

// Forward evaluation keeps the warp, its cache, and the window sums alive so
// the backward stage can run after the term weights are known.
class LossPipeline {
 public:
  LossPipeline(const SceneInputs& sc, const DisparityMap& x,
               const MotionParams& m)
      : sc_(sc), x_(x), m_(m), h_(x.height), w_(x.width),
        hw_(static_cast<std::size_t>(x.height) * x.width) {}

  void forward(bool keep_intermediates, bool want_ir_map) {
    check_inputs();
    const double a = sc_.range.a(), b = sc_.range.b(), s = sc_.range.s();

    if (sc_.use_ir || sc_.use_dd) {
      scaled_.height = h_;
      scaled_.width = w_;
      scaled_.depth.resize(hw_);
      scaled_.valid.assign(hw_, 1);
      const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(hw_);
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t i = 0; i < n; ++i) {
        scaled_.depth[i] = 1.0 / (a * x_.x[i] + b);
      }
    }

    tm_target_ = rigid_to_motion(sc_.ego);
    tm_target_.translation /= s;

    if (sc_.use_tm) {
      breakdown.l_tm =
          (m_.as_vector() - tm_target_.as_vector()).squaredNorm();
    }
    if (sc_.use_ds) {
      breakdown.l_ds =
          smoothness_eval(x_, *sc_.frame_k, sc_.smoothness, 0.0, nullptr);
    }
    if (sc_.use_dd) {
      const double* err = sc_.error_map ? sc_.error_map->err.data() : nullptr;
      breakdown.l_dd =
          dd_eval(scaled_, *sc_.dense_gt, err, sc_.range, 0.0, nullptr, nullptr);
    }
    if (sc_.use_ir) {
      DepthMap metric = scaled_;
      for (double& d : metric.depth) d *= s;
      rigid_ = motion_to_metric_rigid(m_, sc_.range);
      warp_ = warp_image(*sc_.frame_next, metric, rigid_, sc_.intrinsics,
                         keep_intermediates ? &cache_ : nullptr);
      PixelLoss ir = ir_eval(*sc_.frame_k, warp_.warped, warp_.mask, sc_.ssim,
                             keep_intermediates ? &sums_ : nullptr);
      breakdown.l_ir = ir.value;
      n_ir_ = ir.n;
      breakdown.contributing_pixel_count = ir.n;
      if (want_ir_map) breakdown.per_pixel_ir = std::move(ir.per_pixel);
    }
  }

  void backward(const TermWeights& w, std::vector<double>& d_disparity,
                Eigen::Matrix<double, 6, 1>& d_motion) {
    d_disparity.assign(hw_, 0.0);
    d_motion.setZero();
    const double a = sc_.range.a();

    if (sc_.use_tm && w.tm != 0.0) {
      d_motion += w.tm * 2.0 * (m_.as_vector() - tm_target_.as_vector());
    }
    if (sc_.use_ds && w.ds != 0.0) {
      smoothness_eval(x_, *sc_.frame_k, sc_.smoothness, w.ds,
                      d_disparity.data());
    }
    if (sc_.use_dd && w.dd != 0.0) {
      std::vector<double> dd_grad(hw_, 0.0);
      const double* err = sc_.error_map ? sc_.error_map->err.data() : nullptr;
      dd_eval(scaled_, *sc_.dense_gt, err, sc_.range, w.dd, dd_grad.data(),
              nullptr);
      // Chain d(1/(a x + b))/dx = -a * scaled^2.
      const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(hw_);
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t i = 0; i < n; ++i) {
        d_disparity[i] +=
            dd_grad[i] * (-a * scaled_.depth[i] * scaled_.depth[i]);
      }
    }
    if (sc_.use_ir && w.ir != 0.0) {
      backward_ir(w.ir, d_disparity, d_motion);
    }
  }

  LossBreakdown breakdown;

 private:
  void check_inputs() const {
    if (sc_.use_ir && (!sc_.frame_k || !sc_.frame_next)) {
      throw std::invalid_argument("losses: photometric term needs both frames");
    }
    if (sc_.use_ds && !sc_.frame_k) {
      throw std::invalid_argument("losses: smoothness term needs frame k");
    }
    if (sc_.use_dd && !sc_.dense_gt) {
      throw std::invalid_argument("losses: dense term needs completed depth");
    }
    auto check_dims = [&](int hh, int www, const char* what) {
      if (hh != h_ || www != w_) {
        throw std::invalid_argument(std::string("losses: ") + what +
                                    " dimensions differ");
      }
    };
    if (sc_.frame_k) check_dims(sc_.frame_k->height, sc_.frame_k->width, "frame k");
    if (sc_.frame_next) {
      check_dims(sc_.frame_next->height, sc_.frame_next->width, "frame k+1");
    }
    if (sc_.dense_gt) {
      check_dims(sc_.dense_gt->height, sc_.dense_gt->width, "completed depth");
    }
    if (sc_.error_map) {
      check_dims(sc_.error_map->height, sc_.error_map->width, "error map");
    }
  }

  void backward_ir(double w_ir_total, std::vector<double>& d_disparity,
                   Eigen::Matrix<double, 6, 1>& d_motion) {
    const ImageBuffer& src = *sc_.frame_next;
    const ImageBuffer& tgt = *sc_.frame_k;
    const int ch = tgt.channels;
    const int half = sc_.ssim.window / 2;
    const double alpha = sc_.ssim.alpha;
    const double a = sc_.range.a(), s = sc_.range.s();

    // Per-center linear coefficients of dSSIM/d(warped_j): the window-j
    // contribution is k0 + k1*a_j + k2*b_j with a from the target image and
    // b from the warped one.
    std::vector<double> k0(hw_ * ch, 0.0), k1(hw_ * ch, 0.0), k2(hw_ * ch, 0.0);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < h_; ++r) {
      for (int c = 0; c < w_; ++c) {
        const std::size_t i = flat_index(r, c, w_);
        if (!warp_.mask[i]) continue;
        for (int k = 0; k < ch; ++k) {
          const CenterStats cs = center_stats(sums_, i, k, sc_.ssim);
          const double common = 2.0 / (cs.n * cs.b1 * cs.b2);
          const std::size_t f = k * hw_ + i;
          k1[f] = common * cs.a1;
          k2[f] = -common * cs.ssim * cs.b1;
          k0[f] = common * (cs.mu_a * cs.a2 - cs.mu_a * cs.a1 -
                            cs.ssim * (cs.mu_b * cs.b2 - cs.mu_b * cs.b1));
        }
      }
    }

    const Eigen::Matrix3d jl = so3_left_jacobian(m_.axis_angle);
    const Eigen::Matrix3d& rot = rigid_.rotation;
    const Eigen::Vector3d& trans = rigid_.translation;
    const double fx = sc_.intrinsics.fx, fy = sc_.intrinsics.fy;
    const double cx = sc_.intrinsics.cx, cy = sc_.intrinsics.cy;
    const double w_ir = w_ir_total / n_ir_;

    std::vector<Eigen::Matrix<double, 6, 1>> row_motion(
        h_, Eigen::Matrix<double, 6, 1>::Zero());

#pragma omp parallel for schedule(static)
    for (int r = 0; r < h_; ++r) {
      double gw[3], du[3], dv[3];
      Eigen::Matrix<double, 6, 1> acc = Eigen::Matrix<double, 6, 1>::Zero();
      for (int c = 0; c < w_; ++c) {
        const std::size_t j = flat_index(r, c, w_);
        if (!warp_.mask[j]) continue;

        for (int k = 0; k < ch; ++k) {
          const double aj = tgt.data[j * ch + k];
          const double bj = warp_.warped.data[j * ch + k];
          // Gather over the SSIM windows that contain pixel j.
          double ssim_part = 0.0;
          const int r0 = std::max(0, r - half), r1 = std::min(h_ - 1, r + half);
          const int c0 = std::max(0, c - half), c1 = std::min(w_ - 1, c + half);
          for (int rr = r0; rr <= r1; ++rr) {
            for (int cc = c0; cc <= c1; ++cc) {
              const std::size_t i = flat_index(rr, cc, w_);
              if (!warp_.mask[i]) continue;
              const std::size_t f = k * hw_ + i;
              ssim_part += k0[f] + k1[f] * aj + k2[f] * bj;
            }
          }
          gw[k] = w_ir * (-alpha * 0.5 / ch * ssim_part +
                          (1.0 - alpha) / ch * sign_of(bj - aj));
        }

        bilinear_gradient(src, cache_.u[j], cache_.v[j], du, dv);
        double gu = 0.0, gv = 0.0;
        for (int k = 0; k < ch; ++k) {
          gu += gw[k] * du[k];
          gv += gw[k] * dv[k];
        }

        const double qx = cache_.qx[j], qy = cache_.qy[j], qz = cache_.qz[j];
        const double inv_qz = 1.0 / qz;
        const Eigen::Vector3d g_q(
            gu * fx * inv_qz, gv * fy * inv_qz,
            -(gu * fx * qx + gv * fy * qy) * inv_qz * inv_qz);

        const Eigen::Vector3d ray((c - cx) / fx, (r - cy) / fy, 1.0);
        const double d_metric = s * scaled_.depth[j];
        d_disparity[j] += g_q.dot(rot * ray) * (-(a / s) * d_metric * d_metric);

        const Eigen::Vector3d rp(qx - trans.x(), qy - trans.y(),
                                 qz - trans.z());
        acc.head<3>() += jl.transpose() * rp.cross(g_q);
        acc.tail<3>() += s * g_q;
      }
      row_motion[r] = acc;
    }
    for (int r = 0; r < h_; ++r) d_motion += row_motion[r];
  }

  const SceneInputs& sc_;
  const DisparityMap& x_;
  const MotionParams& m_;
  int h_, w_;
  std::size_t hw_;
  DepthMap scaled_;
  Rigid3 rigid_;
  WarpResult warp_;
  WarpCache cache_;
  SsimSums sums_;
  MotionParams tm_target_;
  long n_ir_ = 0;
};

double weighted_total(const LossBreakdown& b, const TermWeights& w) {
  return w.ir * b.l_ir + w.ds * b.l_ds + w.tm * b.l_tm + w.dd * b.l_dd;
}

}  // namespace

LossBreakdown evaluate_losses(const SceneInputs& scene, const DisparityMap& x,
                              const MotionParams& m, bool want_ir_map) {
  LossPipeline pipeline(scene, x, m);
  pipeline.forward(false, want_ir_map);
  return std::move(pipeline.breakdown);
}

LossGradients loss_gradients(const SceneInputs& scene, const DisparityMap& x,
                             const MotionParams& m, const TermWeights& weights) {
  LossPipeline pipeline(scene, x, m);
  pipeline.forward(true, false);
  LossGradients out;
  out.weights = weights;
  pipeline.backward(weights, out.d_disparity, out.d_motion);
  out.breakdown = std::move(pipeline.breakdown);
  out.total = weighted_total(out.breakdown, weights);
  return out;
}

LossGradients loss_gradients(const SceneInputs& scene, const DisparityMap& x,
                             const MotionParams& m, NormalizerState& state) {
  LossPipeline pipeline(scene, x, m);
  pipeline.forward(true, false);
  LossGradients out;
  out.weights = normalizer_weights(pipeline.breakdown, state);
  pipeline.backward(out.weights, out.d_disparity, out.d_motion);
  out.breakdown = std::move(pipeline.breakdown);
  out.total = weighted_total(out.breakdown, out.weights);
  update_normalizers(out.breakdown, state);
  return out;
}

}  // namespace dk
