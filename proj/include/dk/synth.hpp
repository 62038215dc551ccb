#pragma once

#include <utility>
#include <vector>

#include "dk/types.hpp"

namespace dk {

// Fronto-parallel textured plane seen from two camera positions. Both frames
// are rendered analytically from the same band-limited texture, so the pair
// is exactly consistent with the stored depth and motion.
struct PlaneSceneSpec {
  int height = 64;
  int width = 96;
  int channels = 1;
  CameraIntrinsics intrinsics{100.0, 100.0, 47.5, 31.5};
  double plane_depth = 10.0;  // meters, in the frame-k camera
  MotionParams ego;           // frame k -> k+1, metric translation
  unsigned texture_seed = 7;
  int harmonics = 6;
  double min_wavelength_px = 7.0;
  double max_wavelength_px = 18.0;
};

struct PlaneScene {
  ImageBuffer frame_k;
  ImageBuffer frame_next;
  DepthMap depth_gt;  // metric depth of frame k
  Rigid3 ego;         // frame k -> k+1
  CameraIntrinsics intrinsics;
};

PlaneScene make_plane_scene(const PlaneSceneSpec& spec);

// Multiplies every depth by (1 + amplitude * xi) with xi uniform in [-1,1].
DepthMap perturb_depth(const DepthMap& depth, double amplitude, unsigned seed);

// LIDAR-style striped samplings of a fronto-parallel plane from laterally
// translated cameras. Returned poses map each frame into the reference
// camera; stripes interleave so fusing raises the sample density.
struct SparseFrameSpec {
  int height = 48;
  int width = 64;
  CameraIntrinsics intrinsics{80.0, 80.0, 31.5, 23.5};
  double plane_depth = 20.0;  // meters in the reference camera
  int frame_count = 3;
  int row_stride = 3;
};

std::vector<std::pair<SparseDepth, Rigid3>> make_sparse_plane_frames(
    const SparseFrameSpec& spec);

}  // namespace dk
