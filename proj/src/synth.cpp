#include "dk/synth.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "dk/geometry.hpp"

namespace dk {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

// Band-limited plane texture: a fixed sum of oriented sinusoids, mapped
// into [0.05, 0.95].
struct PlaneTexture {
  struct Harmonic {
    double omega, dir_x, dir_y, phase, amplitude;
  };
  std::vector<Harmonic> harmonics;
  int channels = 1;

  PlaneTexture(const PlaneSceneSpec& spec) {
    std::mt19937 rng(spec.texture_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double px_on_plane = spec.plane_depth / spec.intrinsics.fx;
    const int total = spec.harmonics * spec.channels;
    for (int i = 0; i < total; ++i) {
      Harmonic h;
      const double wavelength_px =
          spec.min_wavelength_px +
          unit(rng) * (spec.max_wavelength_px - spec.min_wavelength_px);
      h.omega = kTwoPi / (wavelength_px * px_on_plane);
      const double angle = unit(rng) * kTwoPi;
      h.dir_x = std::cos(angle);
      h.dir_y = std::sin(angle);
      h.phase = unit(rng) * kTwoPi;
      h.amplitude = 0.5 + 0.5 * unit(rng);
      harmonics.push_back(h);
    }
    channels = spec.channels;
  }

  double value(double x, double y, int channel, int per_channel) const {
    double v = 0.0;
    double norm = 0.0;
    for (int i = 0; i < per_channel; ++i) {
      const auto& h = harmonics[channel * per_channel + i];
      v += h.amplitude * std::sin(h.omega * (h.dir_x * x + h.dir_y * y) +
                                  h.phase);
      norm += h.amplitude;
    }
    return 0.5 + 0.45 * v / norm;
  }
};

}  // namespace

PlaneScene make_plane_scene(const PlaneSceneSpec& spec) {
  if (spec.plane_depth <= 0.0) {
    throw std::invalid_argument("plane scene: depth must be positive");
  }
  const PlaneTexture texture(spec);
  const CameraIntrinsics& k = spec.intrinsics;
  const double z = spec.plane_depth;

  PlaneScene scene;
  scene.intrinsics = k;
  scene.ego = motion_to_rigid(spec.ego);
  scene.frame_k = ImageBuffer::zeros(spec.height, spec.width, spec.channels);
  scene.frame_next = ImageBuffer::zeros(spec.height, spec.width, spec.channels);
  scene.depth_gt = DepthMap::constant(spec.height, spec.width, z);

  // Frame k+1 rays intersect the plane expressed in its own coordinates.
  const Rigid3 inv = invert(scene.ego);

#pragma omp parallel for schedule(static)
  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      const double x = z * (c - k.cx) / k.fx;
      const double y = z * (r - k.cy) / k.fy;
      for (int ch = 0; ch < spec.channels; ++ch) {
        scene.frame_k.at(r, c, ch) =
            texture.value(x, y, ch, spec.harmonics);
      }

      const Eigen::Vector3d ray((c - k.cx) / k.fx, (r - k.cy) / k.fy, 1.0);
      const Eigen::Vector3d dir = inv.rotation * ray;
      const double lambda = (z - inv.translation.z()) / dir.z();
      const Eigen::Vector3d p = inv.rotation * (lambda * ray) + inv.translation;
      for (int ch = 0; ch < spec.channels; ++ch) {
        scene.frame_next.at(r, c, ch) =
            texture.value(p.x(), p.y(), ch, spec.harmonics);
      }
    }
  }
  return scene;
}

DepthMap perturb_depth(const DepthMap& depth, double amplitude, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  DepthMap out = depth;
  for (std::size_t i = 0; i < out.depth.size(); ++i) {
    if (out.valid[i]) out.depth[i] *= 1.0 + amplitude * unit(rng);
  }
  return out;
}

std::vector<std::pair<SparseDepth, Rigid3>> make_sparse_plane_frames(
    const SparseFrameSpec& spec) {
  std::vector<std::pair<SparseDepth, Rigid3>> frames;
  for (int f = 0; f < spec.frame_count; ++f) {
    // Pure lateral shift of one pixel per frame at the plane depth.
    Rigid3 pose;
    pose.translation =
        Eigen::Vector3d(0.0, f * spec.plane_depth / spec.intrinsics.fy, 0.0);

    SparseDepth sparse;
    sparse.height = spec.height;
    sparse.width = spec.width;
    for (int r = 0; r < spec.height - (spec.frame_count - 1);
         r += spec.row_stride) {
      for (int c = 0; c < spec.width; ++c) {
        sparse.samples.push_back({r, c, spec.plane_depth});
      }
    }
    frames.emplace_back(std::move(sparse), pose);
  }
  return frames;
}

}  // namespace dk
