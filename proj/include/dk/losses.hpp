#pragma once

#include <optional>
#include <vector>

#include "dk/geometry.hpp"
#include "dk/types.hpp"

namespace dk {

struct SsimConfig {
  int window = 3;       // odd, >= 3
  double c1 = 1e-4;
  double c2 = 9e-4;
  double alpha = 0.85;  // SSIM weight in the SSIM/L1 mix
};

enum class SmoothnessMode {
  kEdgeAware,  // exponent uses the image gradient
  kLiteral,    // exponent uses the disparity gradient itself
};

// Raw (unnormalized) values of the four loss terms.
struct LossBreakdown {
  double l_ir = 0.0;
  double l_ds = 0.0;
  double l_tm = 0.0;
  double l_dd = 0.0;
  std::optional<std::vector<double>> per_pixel_ir;  // row-major, 0 where masked
  long contributing_pixel_count = 0;
};

// Per-pixel structural similarity in [-1,1] from box-window statistics.
// Boundary windows are truncated, never padded. Multi-channel inputs are
// channel-averaged into a single-channel map.
ImageBuffer ssim_map(const ImageBuffer& a, const ImageBuffer& b,
                     const SsimConfig& cfg);

// Masked variant: window statistics run over masked-in pixels only, so the
// result is invariant to the values stored at masked-out pixels.
ImageBuffer ssim_map(const ImageBuffer& a, const ImageBuffer& b,
                     const std::vector<std::uint8_t>& mask,
                     const SsimConfig& cfg);

struct PixelLoss {
  double value = 0.0;
  std::vector<double> per_pixel;  // row-major; 0 at excluded pixels
  long n = 0;                     // contributing pixel count
};

// Mean over masked-in pixels of alpha*(1-SSIM)/2 + (1-alpha)*|I - warped|,
// L1 averaged over channels. Throws std::domain_error on an empty mask.
PixelLoss image_reconstruction_loss(const ImageBuffer& image,
                                    const WarpResult& warped,
                                    const SsimConfig& cfg);

// Forward-difference disparity smoothness, attenuated by image gradients
// (edge-aware) or by the disparity gradient itself (literal). Normalized by
// the full pixel count; boundary pixels without a forward neighbor
// contribute no term.
double smoothness_loss(const DisparityMap& x, const ImageBuffer& image,
                       SmoothnessMode mode = SmoothnessMode::kEdgeAware);

// Squared distance between the 6-parameter prediction and the ground-truth
// motion with translation divided by range.s().
double transform_supervision_loss(const MotionParams& pred, const Rigid3& gt,
                                  const DepthRange& range);

// Distance-weighted supervision against completed depth: mean over co-valid
// pixels of (1-err) * (d - D*)^2 / D* with D* = gt/s and pred already in
// scaled units. Throws std::domain_error on an empty co-valid set.
PixelLoss dense_depth_loss(const DepthMap& pred_scaled, const DepthMap& dense_gt,
                           const ErrorMap& err, const DepthRange& range);

// Running magnitudes used to normalize the total loss. Magnitudes start
// unobserved (0) and are seeded with the first observed |term|; zero-valued
// terms never touch their normalizer.
struct NormalizerState {
  double m_ir = 0.0, m_ds = 0.0, m_tm = 0.0, m_dd = 0.0;
  double beta = 0.99;     // EMA decay
  bool per_batch = false; // normalize by the current |term| instead of the EMA
};

struct TermWeights {
  double ir = 0.0, ds = 0.0, tm = 0.0, dd = 0.0;

  static TermWeights ones() { return {1.0, 1.0, 1.0, 1.0}; }
};

// 1/magnitude per term, seeding fresh magnitudes from |b|. Weights are
// detached constants; zero terms get weight 0. Does not advance the EMAs.
TermWeights normalizer_weights(const LossBreakdown& b, NormalizerState& state);

// m <- beta*m + (1-beta)*|term| for every nonzero term.
void update_normalizers(const LossBreakdown& b, NormalizerState& state);

// Normalized total of Eq-style term/|term| balancing: weights, weighted sum,
// then EMA update, in that order.
double total_loss(const LossBreakdown& b, NormalizerState& state);

// Everything a loss evaluation needs besides the prediction itself.
// Motion convention: MotionParams carry the translation in scaled units
// (metric divided by range.s()); the warp internally rescales to metric.
struct SceneInputs {
  const ImageBuffer* frame_k = nullptr;     // reconstruction target I^k
  const ImageBuffer* frame_next = nullptr;  // warp source I^{k+1}
  CameraIntrinsics intrinsics;
  Rigid3 ego;                               // ground-truth k -> k+1, metric
  const DepthMap* dense_gt = nullptr;       // completed depth, metric
  const ErrorMap* error_map = nullptr;      // nullptr = fully trusted
  DepthRange range;
  SsimConfig ssim;
  SmoothnessMode smoothness = SmoothnessMode::kEdgeAware;
  bool use_ir = true;
  bool use_ds = true;
  bool use_tm = false;
  bool use_dd = false;
};

// Rigid transform the warp uses for a given prediction: rotation from the
// axis-angle, translation rescaled from scaled units back to metric.
Rigid3 motion_to_metric_rigid(const MotionParams& m, const DepthRange& range);

LossBreakdown evaluate_losses(const SceneInputs& scene, const DisparityMap& x,
                              const MotionParams& m, bool want_ir_map = false);

struct LossGradients {
  LossBreakdown breakdown;
  double total = 0.0;                     // weights · raw terms
  TermWeights weights;                    // weights actually applied
  std::vector<double> d_disparity;        // dTotal/dx, row-major
  Eigen::Matrix<double, 6, 1> d_motion =
      Eigen::Matrix<double, 6, 1>::Zero();  // dTotal/dm
};

// Analytic gradients of weights·terms through the warp, bilinear sampling,
// depth conversion, and the axis-angle parameterization. Masks are treated
// as constant.
LossGradients loss_gradients(const SceneInputs& scene, const DisparityMap& x,
                             const MotionParams& m,
                             const TermWeights& weights = TermWeights::ones());

// Same, with weights taken from the running normalizers (seeded from the
// current terms when fresh); advances the EMAs afterwards.
LossGradients loss_gradients(const SceneInputs& scene, const DisparityMap& x,
                             const MotionParams& m, NormalizerState& state);

}  // namespace dk
