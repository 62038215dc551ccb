#pragma once

#include <utility>
#include <vector>

#include "dk/types.hpp"

namespace dk {

// Pixel-center convention used everywhere: pixel (row r, col c) has
// continuous coordinates (u, v) = (c, r).

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

// Left Jacobian of SO(3): d(exp([w + dw]x)) = exp([J_l(w) dw]x) exp([w]x).
Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& axis_angle);

// Rodrigues exponential; zero axis-angle yields the identity rotation.
Rigid3 motion_to_rigid(const MotionParams& m);

// Log map with angle in [0, pi]; switches to the symmetric-matrix branch
// within 1e-6 of pi.
MotionParams rigid_to_motion(const Rigid3& pose);

// compose(A, B) applies B then A.
Rigid3 compose(const Rigid3& a, const Rigid3& b);
Rigid3 invert(const Rigid3& pose);

// Valid pixels only, row-major scan order: (z*(u-cx)/fx, z*(v-cy)/fy, z).
PointCloud back_project(const DepthMap& depth, const CameraIntrinsics& intr);
PointCloud back_project(const SparseDepth& sparse, const CameraIntrinsics& intr);

PointCloud transform_points(const Rigid3& pose, const PointCloud& cloud);

// Drops points with z <= 0, rounds to nearest pixel, drops out-of-bounds,
// and keeps the smallest depth per pixel (z-buffer).
SparseDepth project_points(const PointCloud& cloud, const CameraIntrinsics& intr,
                           int height, int width);

// Ego-motion fusion: each frame back-projected, moved into the reference
// frame, reprojected; z-buffer union across frames. Order-invariant.
SparseDepth fuse_sparse_frames(
    const std::vector<std::pair<SparseDepth, Rigid3>>& frames,
    const CameraIntrinsics& intr);

struct WarpResult {
  ImageBuffer warped;               // masked-off pixels carry value 0
  std::vector<std::uint8_t> mask;   // sampled footprint in bounds, z > 0
};

// Per-pixel records of the warp, kept for analytic differentiation.
struct WarpCache {
  std::vector<double> u, v;         // continuous sample coords in src
  std::vector<double> qx, qy, qz;   // transformed camera-frame point
};

// Inverse warp: for each valid pixel of frame k, back-project with depth_k,
// move by pose_k_to_src, reproject into src, bilinearly sample all channels.
WarpResult warp_image(const ImageBuffer& src, const DepthMap& depth_k,
                      const Rigid3& pose_k_to_src, const CameraIntrinsics& intr,
                      WarpCache* cache = nullptr);

// Bilinear sample of all channels; false when the footprint exits bounds.
bool bilinear_sample(const ImageBuffer& img, double u, double v, double* out);

// Spatial derivative of the bilinear sample within its cell.
void bilinear_gradient(const ImageBuffer& img, double u, double v,
                       double* d_du, double* d_dv);

}  // namespace dk
