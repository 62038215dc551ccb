#include "dk/reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dk::ref {

namespace {

// Centered two-pass window statistics, one window at a time.
double ssim_at(const ImageBuffer& a, const ImageBuffer& b,
               const std::vector<std::uint8_t>* mask, int r, int c, int ch,
               const SsimConfig& cfg) {
  const int half = cfg.window / 2;
  const int r0 = std::max(0, r - half), r1 = std::min(a.height - 1, r + half);
  const int c0 = std::max(0, c - half), c1 = std::min(a.width - 1, c + half);

  double mu_a = 0.0, mu_b = 0.0;
  int n = 0;
  for (int rr = r0; rr <= r1; ++rr) {
    for (int cc = c0; cc <= c1; ++cc) {
      if (mask && !(*mask)[flat_index(rr, cc, a.width)]) continue;
      mu_a += a.at(rr, cc, ch);
      mu_b += b.at(rr, cc, ch);
      ++n;
    }
  }
  mu_a /= n;
  mu_b /= n;

  double var_a = 0.0, var_b = 0.0, cov = 0.0;
  for (int rr = r0; rr <= r1; ++rr) {
    for (int cc = c0; cc <= c1; ++cc) {
      if (mask && !(*mask)[flat_index(rr, cc, a.width)]) continue;
      const double da = a.at(rr, cc, ch) - mu_a;
      const double db = b.at(rr, cc, ch) - mu_b;
      var_a += da * da;
      var_b += db * db;
      cov += da * db;
    }
  }
  var_a /= n;
  var_b /= n;
  cov /= n;

  const double num = (2.0 * mu_a * mu_b + cfg.c1) * (2.0 * cov + cfg.c2);
  const double den =
      (mu_a * mu_a + mu_b * mu_b + cfg.c1) * (var_a + var_b + cfg.c2);
  return num / den;
}

ImageBuffer ssim_impl(const ImageBuffer& a, const ImageBuffer& b,
                      const std::vector<std::uint8_t>* mask,
                      const SsimConfig& cfg) {
  if (a.height != b.height || a.width != b.width || a.channels != b.channels) {
    throw std::invalid_argument("ssim: image dimensions differ");
  }
  ImageBuffer out = ImageBuffer::zeros(a.height, a.width, 1);
  for (int r = 0; r < a.height; ++r) {
    for (int c = 0; c < a.width; ++c) {
      const std::size_t i = flat_index(r, c, a.width);
      if (mask && !(*mask)[i]) continue;
      double acc = 0.0;
      for (int ch = 0; ch < a.channels; ++ch) {
        acc += ssim_at(a, b, mask, r, c, ch, cfg);
      }
      out.data[i] = acc / a.channels;
    }
  }
  return out;
}

}  // namespace

ImageBuffer ssim_map(const ImageBuffer& a, const ImageBuffer& b,
                     const SsimConfig& cfg) {
  return ssim_impl(a, b, nullptr, cfg);
}

ImageBuffer ssim_map(const ImageBuffer& a, const ImageBuffer& b,
                     const std::vector<std::uint8_t>& mask,
                     const SsimConfig& cfg) {
  return ssim_impl(a, b, &mask, cfg);
}

PixelLoss image_reconstruction_loss(const ImageBuffer& image,
                                    const WarpResult& warped,
                                    const SsimConfig& cfg) {
  const ImageBuffer ssim = ssim_impl(image, warped.warped, &warped.mask, cfg);
  PixelLoss out;
  out.per_pixel.assign(image.pixel_count(), 0.0);
  double total = 0.0;
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      const std::size_t i = flat_index(r, c, image.width);
      if (!warped.mask[i]) continue;
      double l1 = 0.0;
      for (int ch = 0; ch < image.channels; ++ch) {
        l1 += std::abs(image.at(r, c, ch) - warped.warped.at(r, c, ch));
      }
      l1 /= image.channels;
      out.per_pixel[i] =
          cfg.alpha * 0.5 * (1.0 - ssim.data[i]) + (1.0 - cfg.alpha) * l1;
      total += out.per_pixel[i];
      ++out.n;
    }
  }
  if (out.n == 0) throw std::domain_error("image reconstruction: empty mask");
  out.value = total / out.n;
  return out;
}

double smoothness_loss(const DisparityMap& x, const ImageBuffer& image,
                       SmoothnessMode mode) {
  double total = 0.0;
  for (int r = 0; r < x.height; ++r) {
    for (int c = 0; c < x.width; ++c) {
      if (c + 1 < x.width) {
        const double g = std::abs(x.at(r, c + 1) - x.at(r, c));
        double e;
        if (mode == SmoothnessMode::kEdgeAware) {
          double gi = 0.0;
          for (int ch = 0; ch < image.channels; ++ch) {
            gi += std::abs(image.at(r, c + 1, ch) - image.at(r, c, ch));
          }
          e = std::exp(-gi / image.channels);
        } else {
          e = std::exp(-g);
        }
        total += g * e;
      }
      if (r + 1 < x.height) {
        const double g = std::abs(x.at(r + 1, c) - x.at(r, c));
        double e;
        if (mode == SmoothnessMode::kEdgeAware) {
          double gi = 0.0;
          for (int ch = 0; ch < image.channels; ++ch) {
            gi += std::abs(image.at(r + 1, c, ch) - image.at(r, c, ch));
          }
          e = std::exp(-gi / image.channels);
        } else {
          e = std::exp(-g);
        }
        total += g * e;
      }
    }
  }
  return total / (static_cast<double>(x.height) * x.width);
}

PixelLoss dense_depth_loss(const DepthMap& pred_scaled, const DepthMap& dense_gt,
                           const ErrorMap& err, const DepthRange& range) {
  PixelLoss out;
  out.per_pixel.assign(pred_scaled.pixel_count(), 0.0);
  double total = 0.0;
  for (int r = 0; r < pred_scaled.height; ++r) {
    for (int c = 0; c < pred_scaled.width; ++c) {
      const std::size_t i = flat_index(r, c, pred_scaled.width);
      if (!dense_gt.valid[i] || !pred_scaled.valid[i]) continue;
      const double target = dense_gt.depth[i] / range.s();
      const double diff = pred_scaled.depth[i] - target;
      out.per_pixel[i] = (1.0 - err.err[i]) * diff * diff / target;
      total += out.per_pixel[i];
      ++out.n;
    }
  }
  if (out.n == 0) throw std::domain_error("dense depth loss: empty co-valid set");
  out.value = total / out.n;
  return out;
}

WarpResult warp_image(const ImageBuffer& src, const DepthMap& depth_k,
                      const Rigid3& pose_k_to_src, const CameraIntrinsics& intr) {
  WarpResult out;
  out.warped = ImageBuffer::zeros(src.height, src.width, src.channels);
  out.mask.assign(depth_k.pixel_count(), 0);
  for (int r = 0; r < depth_k.height; ++r) {
    for (int c = 0; c < depth_k.width; ++c) {
      const std::size_t i = flat_index(r, c, depth_k.width);
      if (!depth_k.valid[i]) continue;
      const double z = depth_k.depth[i];
      const Eigen::Vector3d p(z * (c - intr.cx) / intr.fx,
                              z * (r - intr.cy) / intr.fy, z);
      const Eigen::Vector3d q =
          pose_k_to_src.rotation * p + pose_k_to_src.translation;
      if (!(q.z() > 0.0)) continue;
      const double u = intr.fx * q.x() / q.z() + intr.cx;
      const double v = intr.fy * q.y() / q.z() + intr.cy;
      if (!(u >= 0.0 && u <= src.width - 1 && v >= 0.0 && v <= src.height - 1)) {
        continue;
      }
      int x0 = std::min(static_cast<int>(std::floor(u)),
                        std::max(0, src.width - 2));
      int y0 = std::min(static_cast<int>(std::floor(v)),
                        std::max(0, src.height - 2));
      const int x1 = std::min(x0 + 1, src.width - 1);
      const int y1 = std::min(y0 + 1, src.height - 1);
      const double fu = u - x0;
      const double fv = v - y0;
      for (int ch = 0; ch < src.channels; ++ch) {
        out.warped.at(r, c, ch) =
            (1.0 - fv) * ((1.0 - fu) * src.at(y0, x0, ch) +
                          fu * src.at(y0, x1, ch)) +
            fv * ((1.0 - fu) * src.at(y1, x0, ch) + fu * src.at(y1, x1, ch));
      }
      out.mask[i] = 1;
    }
  }
  return out;
}

DepthMap map_to_depth(const DisparityMap& x, const DepthRange& range) {
  DepthMap out;
  out.height = x.height;
  out.width = x.width;
  out.depth.resize(x.x.size());
  out.valid.assign(x.x.size(), 1);
  for (std::size_t i = 0; i < x.x.size(); ++i) {
    out.depth[i] = range.s() / (range.a() * x.x[i] + range.b());
  }
  return out;
}

double silog_image(const DepthMap& pred, const DepthMap& gt) {
  double sum = 0.0, sum_sq = 0.0;
  long n = 0;
  for (std::size_t i = 0; i < pred.depth.size(); ++i) {
    if (!pred.valid[i] || !gt.valid[i]) continue;
    const double y = std::log(pred.depth[i]) - std::log(gt.depth[i]);
    sum += y;
    sum_sq += y * y;
    ++n;
  }
  if (n < 2) throw std::domain_error("silog: needs at least 2 co-valid pixels");
  return sum_sq / n - (sum / n) * (sum / n);
}

}  // namespace dk::ref
