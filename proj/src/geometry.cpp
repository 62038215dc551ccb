#include "dk/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dk {

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::Vector3d vee(const Eigen::Matrix3d& m) {
  return {m(2, 1), m(0, 2), m(1, 0)};
}

}  // namespace

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& axis_angle) {
  const double theta = axis_angle.norm();
  const Eigen::Matrix3d w = skew(axis_angle);
  double c1, c2;  // (1-cos)/t^2, (t-sin)/t^3
  if (theta < 1e-5) {
    const double t2 = theta * theta;
    c1 = 0.5 - t2 / 24.0;
    c2 = 1.0 / 6.0 - t2 / 120.0;
  } else {
    c1 = (1.0 - std::cos(theta)) / (theta * theta);
    c2 = (theta - std::sin(theta)) / (theta * theta * theta);
  }
  return Eigen::Matrix3d::Identity() + c1 * w + c2 * w * w;
}

Rigid3 motion_to_rigid(const MotionParams& m) {
  const double theta = m.axis_angle.norm();
  const Eigen::Matrix3d w = skew(m.axis_angle);
  double c1, c2;  // sin/t, (1-cos)/t^2
  if (theta < 1e-5) {
    const double t2 = theta * theta;
    c1 = 1.0 - t2 / 6.0;
    c2 = 0.5 - t2 / 24.0;
  } else {
    c1 = std::sin(theta) / theta;
    c2 = (1.0 - std::cos(theta)) / (theta * theta);
  }
  Rigid3 out;
  out.rotation = Eigen::Matrix3d::Identity() + c1 * w + c2 * w * w;
  out.translation = m.translation;
  return out;
}

MotionParams rigid_to_motion(const Rigid3& pose) {
  const Eigen::Matrix3d& r = pose.rotation;
  MotionParams out;
  out.translation = pose.translation;

  const double cos_theta =
      std::min(1.0, std::max(-1.0, (r.trace() - 1.0) * 0.5));
  const double theta = std::acos(cos_theta);

  if (theta < 1e-10) {
    out.axis_angle = 0.5 * vee(r - r.transpose());
    return out;
  }
  if (kPi - theta < 1e-6) {
    // Symmetric branch: (sym(R) - cos(theta) I)/(1 - cos(theta)) = n n^T,
    // with the antisymmetric part discarded so it cannot pollute the axis.
    const Eigen::Matrix3d sym = 0.5 * (r + r.transpose());
    const Eigen::Matrix3d nnt =
        (sym - cos_theta * Eigen::Matrix3d::Identity()) / (1.0 - cos_theta);
    int k = 0;
    nnt.diagonal().maxCoeff(&k);
    Eigen::Vector3d axis;
    axis[k] = std::sqrt(std::max(0.0, nnt(k, k)));
    for (int j = 0; j < 3; ++j) {
      if (j != k) axis[j] = nnt(k, j) / axis[k];
    }
    axis.normalize();
    // Below pi the antisymmetric part still carries the sign.
    const Eigen::Vector3d anti = vee(r - r.transpose());
    if (anti.dot(axis) < 0.0) axis = -axis;
    out.axis_angle = theta * axis;
    return out;
  }
  out.axis_angle = (theta / (2.0 * std::sin(theta))) * vee(r - r.transpose());
  return out;
}

Rigid3 compose(const Rigid3& a, const Rigid3& b) {
  Rigid3 out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

Rigid3 invert(const Rigid3& pose) {
  Rigid3 out;
  out.rotation = pose.rotation.transpose();
  out.translation = -(out.rotation * pose.translation);
  return out;
}

PointCloud back_project(const DepthMap& depth, const CameraIntrinsics& intr) {
  PointCloud cloud;
  cloud.points.reserve(depth.valid_count());
  for (int r = 0; r < depth.height; ++r) {
    for (int c = 0; c < depth.width; ++c) {
      if (!depth.is_valid(r, c)) continue;
      const double z = depth.at(r, c);
      cloud.points.emplace_back(z * (c - intr.cx) / intr.fx,
                                z * (r - intr.cy) / intr.fy, z);
    }
  }
  return cloud;
}

PointCloud back_project(const SparseDepth& sparse, const CameraIntrinsics& intr) {
  PointCloud cloud;
  cloud.points.reserve(sparse.samples.size());
  for (const auto& s : sparse.samples) {
    cloud.points.emplace_back(s.depth * (s.col - intr.cx) / intr.fx,
                              s.depth * (s.row - intr.cy) / intr.fy, s.depth);
  }
  return cloud;
}

PointCloud transform_points(const Rigid3& pose, const PointCloud& cloud) {
  PointCloud out;
  out.points.resize(cloud.points.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(cloud.points.size());
#pragma omp parallel for
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out.points[i] = pose.rotation * cloud.points[i] + pose.translation;
  }
  return out;
}

namespace {

// Shared z-buffer splat used by project_points and fuse_sparse_frames.
void splat_min(const PointCloud& cloud, const CameraIntrinsics& intr,
               int height, int width, std::vector<double>& zbuf) {
  for (const auto& p : cloud.points) {
    if (!(p.z() > 0.0)) continue;
    const double u = intr.fx * p.x() / p.z() + intr.cx;
    const double v = intr.fy * p.y() / p.z() + intr.cy;
    const long col = std::lround(u);
    const long row = std::lround(v);
    if (row < 0 || row >= height || col < 0 || col >= width) continue;
    double& cell = zbuf[flat_index(static_cast<int>(row),
                                   static_cast<int>(col), width)];
    cell = std::min(cell, p.z());
  }
}

SparseDepth collect_sparse(const std::vector<double>& zbuf, int height,
                           int width) {
  SparseDepth out;
  out.height = height;
  out.width = width;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double z = zbuf[flat_index(r, c, width)];
      if (z < std::numeric_limits<double>::infinity()) {
        out.samples.push_back({r, c, z});
      }
    }
  }
  return out;
}

}  // namespace

SparseDepth project_points(const PointCloud& cloud, const CameraIntrinsics& intr,
                           int height, int width) {
  std::vector<double> zbuf(static_cast<std::size_t>(height) * width,
                           std::numeric_limits<double>::infinity());
  splat_min(cloud, intr, height, width, zbuf);
  return collect_sparse(zbuf, height, width);
}

SparseDepth fuse_sparse_frames(
    const std::vector<std::pair<SparseDepth, Rigid3>>& frames,
    const CameraIntrinsics& intr) {
  if (frames.empty()) return SparseDepth{};
  const int height = frames.front().first.height;
  const int width = frames.front().first.width;
  for (const auto& [frame, pose] : frames) {
    if (frame.height != height || frame.width != width) {
      throw std::invalid_argument("fused frames must share dimensions");
    }
  }
  std::vector<double> zbuf(static_cast<std::size_t>(height) * width,
                           std::numeric_limits<double>::infinity());
  for (const auto& [frame, pose] : frames) {
    const PointCloud moved = transform_points(pose, back_project(frame, intr));
    splat_min(moved, intr, height, width, zbuf);
  }
  return collect_sparse(zbuf, height, width);
}

bool bilinear_sample(const ImageBuffer& img, double u, double v, double* out) {
  if (!(u >= 0.0 && u <= img.width - 1 && v >= 0.0 && v <= img.height - 1)) {
    return false;
  }
  int x0 = static_cast<int>(std::floor(u));
  int y0 = static_cast<int>(std::floor(v));
  x0 = std::min(x0, std::max(0, img.width - 2));
  y0 = std::min(y0, std::max(0, img.height - 2));
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fu = u - x0;
  const double fv = v - y0;
  for (int ch = 0; ch < img.channels; ++ch) {
    const double p00 = img.at(y0, x0, ch);
    const double p10 = img.at(y0, x1, ch);
    const double p01 = img.at(y1, x0, ch);
    const double p11 = img.at(y1, x1, ch);
    out[ch] = (1.0 - fv) * ((1.0 - fu) * p00 + fu * p10) +
              fv * ((1.0 - fu) * p01 + fu * p11);
  }
  return true;
}

void bilinear_gradient(const ImageBuffer& img, double u, double v,
                       double* d_du, double* d_dv) {
  int x0 = static_cast<int>(std::floor(u));
  int y0 = static_cast<int>(std::floor(v));
  x0 = std::min(x0, std::max(0, img.width - 2));
  y0 = std::min(y0, std::max(0, img.height - 2));
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fu = std::min(1.0, std::max(0.0, u - x0));
  const double fv = std::min(1.0, std::max(0.0, v - y0));
  for (int ch = 0; ch < img.channels; ++ch) {
    const double p00 = img.at(y0, x0, ch);
    const double p10 = img.at(y0, x1, ch);
    const double p01 = img.at(y1, x0, ch);
    const double p11 = img.at(y1, x1, ch);
    d_du[ch] = (1.0 - fv) * (p10 - p00) + fv * (p11 - p01);
    d_dv[ch] = (1.0 - fu) * (p01 - p00) + fu * (p11 - p10);
  }
}

WarpResult warp_image(const ImageBuffer& src, const DepthMap& depth_k,
                      const Rigid3& pose_k_to_src, const CameraIntrinsics& intr,
                      WarpCache* cache) {
  if (src.height != depth_k.height || src.width != depth_k.width) {
    throw std::invalid_argument("warp: src and depth dimensions differ");
  }
  WarpResult out;
  out.warped = ImageBuffer::zeros(src.height, src.width, src.channels);
  out.mask.assign(depth_k.pixel_count(), 0);
  if (cache) {
    cache->u.assign(depth_k.pixel_count(), 0.0);
    cache->v.assign(depth_k.pixel_count(), 0.0);
    cache->qx.assign(depth_k.pixel_count(), 0.0);
    cache->qy.assign(depth_k.pixel_count(), 0.0);
    cache->qz.assign(depth_k.pixel_count(), 0.0);
  }
  const Eigen::Matrix3d& rot = pose_k_to_src.rotation;
  const Eigen::Vector3d& trans = pose_k_to_src.translation;

#pragma omp parallel for schedule(static)
  for (int r = 0; r < depth_k.height; ++r) {
    double vals[3];
    for (int c = 0; c < depth_k.width; ++c) {
      const std::size_t i = flat_index(r, c, depth_k.width);
      if (!depth_k.valid[i]) continue;
      const double z = depth_k.depth[i];
      const Eigen::Vector3d ray((c - intr.cx) / intr.fx,
                                (r - intr.cy) / intr.fy, 1.0);
      const Eigen::Vector3d q = rot * (z * ray) + trans;
      if (!(q.z() > 0.0)) continue;
      const double u = intr.fx * q.x() / q.z() + intr.cx;
      const double v = intr.fy * q.y() / q.z() + intr.cy;
      if (cache) {
        cache->u[i] = u;
        cache->v[i] = v;
        cache->qx[i] = q.x();
        cache->qy[i] = q.y();
        cache->qz[i] = q.z();
      }
      if (!bilinear_sample(src, u, v, vals)) continue;
      for (int ch = 0; ch < src.channels; ++ch) {
        out.warped.data[i * src.channels + ch] = vals[ch];
      }
      out.mask[i] = 1;
    }
  }
  return out;
}

}  // namespace dk
