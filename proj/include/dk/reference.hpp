#pragma once

#include "dk/losses.hpp"
#include "dk/types.hpp"

// Serial reference implementations of the parallel kernels. These follow the
// definitions directly (per-window loops, per-pixel scans) with no shared
// intermediates, and are the comparison baseline for both the unit tests and
// the bench tool.
namespace dk::ref {

ImageBuffer ssim_map(const ImageBuffer& a, const ImageBuffer& b,
                     const SsimConfig& cfg);
ImageBuffer ssim_map(const ImageBuffer& a, const ImageBuffer& b,
                     const std::vector<std::uint8_t>& mask,
                     const SsimConfig& cfg);

PixelLoss image_reconstruction_loss(const ImageBuffer& image,
                                    const WarpResult& warped,
                                    const SsimConfig& cfg);

double smoothness_loss(const DisparityMap& x, const ImageBuffer& image,
                       SmoothnessMode mode);

PixelLoss dense_depth_loss(const DepthMap& pred_scaled, const DepthMap& dense_gt,
                           const ErrorMap& err, const DepthRange& range);

WarpResult warp_image(const ImageBuffer& src, const DepthMap& depth_k,
                      const Rigid3& pose_k_to_src, const CameraIntrinsics& intr);

DepthMap map_to_depth(const DisparityMap& x, const DepthRange& range);

// Single-pass transcription of the scale-invariant log metric.
double silog_image(const DepthMap& pred, const DepthMap& gt);

}  // namespace dk::ref
