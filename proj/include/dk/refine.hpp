#pragma once

#include <string>
#include <vector>

#include "dk/losses.hpp"
#include "dk/types.hpp"

namespace dk {

// Unconstrained per-pixel latent; disparity is sigmoid(u), so predictions
// stay inside [0,1] by construction.
struct LatentField {
  int height = 0;
  int width = 0;
  std::vector<double> u;
};

enum class MotionHandling { kFixedToGroundTruth, kJointlyOptimized };
enum class StopReason { kConverged, kMaxIterations, kDiverged };

struct RefineConfig {
  int max_iterations = 2000;
  double step = 1e-2;
  double beta1 = 0.9;     // adaptive-moment decay rates
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double tolerance = 1e-7;     // relative decrease over the window below
  int tolerance_window = 10;
  bool use_ir = true;
  bool use_ds = true;
  bool use_tm = false;
  bool use_dd = false;
  SsimConfig ssim;
  DepthRange range;
  SmoothnessMode smoothness = SmoothnessMode::kEdgeAware;
  MotionHandling motion = MotionHandling::kFixedToGroundTruth;
  bool normalize_losses = true;  // Eq-style term/|term| balancing
  double normalizer_beta = 0.99;
};

struct IterationRecord {
  LossBreakdown losses;  // raw terms
  double total = 0.0;    // optimized objective (normalized when enabled)
};

struct RefineTrace {
  std::vector<IterationRecord> iterations;
  int iteration_count = 0;
  StopReason reason = StopReason::kMaxIterations;
  int diverged_at = -1;  // iteration index when reason == kDiverged
};

struct RefineResult {
  DepthMap depth;        // metric
  MotionParams motion;   // scaled-units translation
  RefineTrace trace;
};

// Constant-disparity init; x must lie strictly inside (0,1).
LatentField init_latent(double disparity, int height, int width);

// Dense seed: u = logit(depth_to_disparity(seed)). Seed depths must lie
// strictly inside (s*d_min, s*d_max); invalid pixels fall back to the valid
// median.
LatentField init_latent(const DepthMap& seed, const DepthRange& range);

// Sparse seed: seeded pixels exact, the rest at the seed median.
LatentField init_latent(const SparseDepth& seed, const DepthRange& range);

DisparityMap latent_to_disparity(const LatentField& field);

// Direct dense refinement: adaptive-moment descent of the enabled losses
// over the latent field (and the motion, when jointly optimized).
RefineResult refine_depth(const ImageBuffer& frame_k,
                          const ImageBuffer& frame_next,
                          const CameraIntrinsics& intr, const Rigid3& ego,
                          const DepthMap* dense_gt, const ErrorMap* err,
                          const LatentField& init, const RefineConfig& cfg);

struct LatentGradients {
  LossBreakdown breakdown;
  double total = 0.0;
  std::vector<double> d_latent;  // chained through the sigmoid
  Eigen::Matrix<double, 6, 1> d_motion = Eigen::Matrix<double, 6, 1>::Zero();
};

// Gradient of weights·terms with respect to the latent, the quantity the
// finite-difference checks probe.
LatentGradients latent_gradients(const SceneInputs& scene,
                                 const LatentField& field,
                                 const MotionParams& m,
                                 const TermWeights& weights = TermWeights::ones());

struct ScaleProbeReport {
  double c = 1.0;
  double l_ir_base = 0.0;
  double l_ir_scaled = 0.0;
  double delta_ir = 0.0;       // |scaled - base|
  bool tm_enabled = false;
  double total_base = 0.0;     // raw l_ir (+ l_tm when enabled)
  double total_scaled = 0.0;
};

// Evaluates the photometric loss at (depth, translation) and at
// (c*depth, c*translation). With the transform-supervision term enabled the
// joint scaling is no longer free.
ScaleProbeReport scale_ambiguity_probe(const ImageBuffer& frame_k,
                                       const ImageBuffer& frame_next,
                                       const CameraIntrinsics& intr,
                                       const Rigid3& ego, const DepthMap& depth,
                                       double c, const SsimConfig& ssim,
                                       bool include_tm, const DepthRange& range);

// Columns: iter,l_ir,l_ds,l_tm,l_dd,total
void write_trace_csv(const std::string& path, const RefineTrace& trace);

}  // namespace dk
