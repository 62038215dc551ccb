#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dk/types.hpp"

namespace dk {

struct MetricReport {
  double silog = 0.0;
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double mae = 0.0;
  double irmse = 0.0;
  double delta1 = 0.0, delta2 = 0.0, delta3 = 0.0;
  long image_count = 0;
  long evaluated_pixel_total = 0;
};

// Per-image values of the non-SILog metrics.
struct ImageMetrics {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double mae = 0.0;
  double irmse = 0.0;
  double delta1 = 0.0, delta2 = 0.0, delta3 = 0.0;
  long n = 0;
};

struct ScaleStats {
  std::vector<double> per_image_ratios;
  double mean = 0.0;
  double stddev = 0.0;  // population convention
};

struct CropRect {
  int top = 0, bottom = 0;  // rows [top, bottom)
  int left = 0, right = 0;  // cols [left, right)
};

struct EvalOptions {
  // Pool pixels across images for the non-SILog metrics instead of averaging
  // per-image values; SILog always aggregates per image.
  bool pixel_pooled = false;
  std::optional<CropRect> crop;
  // Clamp predictions into [clamp_min, clamp_max] before evaluating.
  std::optional<std::pair<double, double>> clamp;
};

// Ground truth side of an evaluation pair: dense map or sparse samples.
struct GroundTruth {
  const DepthMap* dense = nullptr;
  const SparseDepth* sparse = nullptr;

  GroundTruth(const DepthMap& d) : dense(&d) {}        // NOLINT(runtime/explicit)
  GroundTruth(const SparseDepth& s) : sparse(&s) {}    // NOLINT(runtime/explicit)
};

struct EvalPair {
  const DepthMap* pred = nullptr;
  GroundTruth gt;
};

// Scale-invariant log error: var(log d - log d*) over co-valid pixels.
// Requires >= 2 co-valid pixels.
double silog_image(const DepthMap& pred, const GroundTruth& gt,
                   const EvalOptions& options = {});

// AbsRel, SqRel, RMSE, RMSE log, MAE, iRMSE, delta thresholds for one image.
// Requires >= 1 co-valid pixel.
ImageMetrics standard_metrics(const DepthMap& pred, const GroundTruth& gt,
                              const EvalOptions& options = {});

MetricReport evaluate_dataset(const std::vector<EvalPair>& pairs,
                              const EvalOptions& options = {});

// Ratio of ground-truth to predicted depth median over co-valid pixels;
// medians take the lower-middle element for even counts.
double median_scale(const DepthMap& pred, const GroundTruth& gt,
                    const EvalOptions& options = {});

ScaleStats global_scale_statistics(const std::vector<EvalPair>& pairs,
                                   const EvalOptions& options = {});

// Multiplies every valid depth by c > 0; mask unchanged.
DepthMap apply_scale(const DepthMap& pred, double c);

std::string report_text(const MetricReport& report);
std::string report_json(const MetricReport& report);

}  // namespace dk
