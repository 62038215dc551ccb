#include "dk/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dk {

namespace {

struct Sample {
  double pred;
  double gt;
};

bool in_crop(const EvalOptions& opt, int r, int c) {
  if (!opt.crop) return true;
  const CropRect& k = *opt.crop;
  return r >= k.top && r < k.bottom && c >= k.left && c < k.right;
}

double clamp_pred(const EvalOptions& opt, double d) {
  if (!opt.clamp) return d;
  return std::min(opt.clamp->second, std::max(opt.clamp->first, d));
}

// Co-valid pixels: valid in both maps with positive ground truth.
std::vector<Sample> covalid(const DepthMap& pred, const GroundTruth& gt,
                            const EvalOptions& opt) {
  std::vector<Sample> out;
  if (gt.dense) {
    const DepthMap& g = *gt.dense;
    if (g.height != pred.height || g.width != pred.width) {
      throw std::invalid_argument("metrics: dimensions differ");
    }
    for (int r = 0; r < g.height; ++r) {
      for (int c = 0; c < g.width; ++c) {
        const std::size_t i = flat_index(r, c, g.width);
        if (!g.valid[i] || !pred.valid[i] || !(g.depth[i] > 0.0)) continue;
        if (!in_crop(opt, r, c)) continue;
        out.push_back({clamp_pred(opt, pred.depth[i]), g.depth[i]});
      }
    }
  } else {
    const SparseDepth& g = *gt.sparse;
    if (g.height != pred.height || g.width != pred.width) {
      throw std::invalid_argument("metrics: dimensions differ");
    }
    for (const auto& s : g.samples) {
      const std::size_t i = flat_index(s.row, s.col, g.width);
      if (!pred.valid[i] || !(s.depth > 0.0)) continue;
      if (!in_crop(opt, s.row, s.col)) continue;
      out.push_back({clamp_pred(opt, pred.depth[i]), s.depth});
    }
  }
  return out;
}

double silog_of(const std::vector<Sample>& samples) {
  if (samples.size() < 2) {
    throw std::domain_error("silog: needs at least 2 co-valid pixels");
  }
  // Two-pass variance keeps the scale invariance down at 1e-10.
  double mean = 0.0;
  for (const auto& s : samples) mean += std::log(s.pred) - std::log(s.gt);
  mean /= samples.size();
  double var = 0.0;
  for (const auto& s : samples) {
    const double d = std::log(s.pred) - std::log(s.gt) - mean;
    var += d * d;
  }
  return var / samples.size();
}

ImageMetrics standard_of(const std::vector<Sample>& samples) {
  if (samples.empty()) {
    throw std::domain_error("metrics: empty co-valid set");
  }
  ImageMetrics m;
  m.n = static_cast<long>(samples.size());
  double d1 = 0, d2 = 0, d3 = 0;
  for (const auto& s : samples) {
    const double diff = s.pred - s.gt;
    m.abs_rel += std::abs(diff) / s.gt;
    m.sq_rel += diff * diff / s.gt;
    m.rmse += diff * diff;
    const double dl = std::log(s.pred) - std::log(s.gt);
    m.rmse_log += dl * dl;
    m.mae += std::abs(diff);
    const double di = 1.0 / s.pred - 1.0 / s.gt;
    m.irmse += di * di;
    const double ratio = std::max(s.pred / s.gt, s.gt / s.pred);
    d1 += ratio < 1.25;
    d2 += ratio < 1.25 * 1.25;
    d3 += ratio < 1.25 * 1.25 * 1.25;
  }
  const double n = static_cast<double>(m.n);
  m.abs_rel /= n;
  m.sq_rel /= n;
  m.rmse = std::sqrt(m.rmse / n);
  m.rmse_log = std::sqrt(m.rmse_log / n);
  m.mae /= n;
  m.irmse = std::sqrt(m.irmse / n);
  m.delta1 = d1 / n;
  m.delta2 = d2 / n;
  m.delta3 = d3 / n;
  return m;
}

double lower_median(std::vector<double> v) {
  const std::size_t k = (v.size() - 1) / 2;
  std::nth_element(v.begin(), v.begin() + k, v.end());
  return v[k];
}

}  // namespace

double silog_image(const DepthMap& pred, const GroundTruth& gt,
                   const EvalOptions& options) {
  return silog_of(covalid(pred, gt, options));
}

ImageMetrics standard_metrics(const DepthMap& pred, const GroundTruth& gt,
                              const EvalOptions& options) {
  return standard_of(covalid(pred, gt, options));
}

MetricReport evaluate_dataset(const std::vector<EvalPair>& pairs,
                              const EvalOptions& options) {
  if (pairs.empty()) {
    throw std::invalid_argument("evaluate_dataset: empty pair list");
  }
  MetricReport report;
  report.image_count = static_cast<long>(pairs.size());

  // Per-image work runs in parallel; aggregation below is in index order.
  const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(pairs.size());
  std::vector<ImageMetrics> per_image(pairs.size());
  std::vector<double> silogs(pairs.size(), 0.0);
  std::vector<std::vector<Sample>> sample_sets(pairs.size());
  std::vector<std::string> errors(pairs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    try {
      std::vector<Sample> s = covalid(*pairs[i].pred, pairs[i].gt, options);
      silogs[i] = silog_of(s);
      per_image[i] = standard_of(s);
      if (options.pixel_pooled) sample_sets[i] = std::move(s);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  std::vector<Sample> pooled;
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    if (!errors[i].empty()) {
      throw std::domain_error("image " + std::to_string(i) + ": " + errors[i]);
    }
    report.silog += silogs[i];
    report.evaluated_pixel_total += per_image[i].n;
    if (options.pixel_pooled) {
      pooled.insert(pooled.end(), sample_sets[i].begin(), sample_sets[i].end());
    }
  }
  report.silog /= static_cast<double>(pairs.size());

  if (options.pixel_pooled) {
    const ImageMetrics m = standard_of(pooled);
    report.abs_rel = m.abs_rel;
    report.sq_rel = m.sq_rel;
    report.rmse = m.rmse;
    report.rmse_log = m.rmse_log;
    report.mae = m.mae;
    report.irmse = m.irmse;
    report.delta1 = m.delta1;
    report.delta2 = m.delta2;
    report.delta3 = m.delta3;
  } else {
    const double inv_m = 1.0 / static_cast<double>(pairs.size());
    for (const auto& m : per_image) {
      report.abs_rel += m.abs_rel * inv_m;
      report.sq_rel += m.sq_rel * inv_m;
      report.rmse += m.rmse * inv_m;
      report.rmse_log += m.rmse_log * inv_m;
      report.mae += m.mae * inv_m;
      report.irmse += m.irmse * inv_m;
      report.delta1 += m.delta1 * inv_m;
      report.delta2 += m.delta2 * inv_m;
      report.delta3 += m.delta3 * inv_m;
    }
  }
  return report;
}

double median_scale(const DepthMap& pred, const GroundTruth& gt,
                    const EvalOptions& options) {
  const std::vector<Sample> samples = covalid(pred, gt, options);
  if (samples.empty()) {
    throw std::domain_error("median_scale: empty co-valid set");
  }
  std::vector<double> p, g;
  p.reserve(samples.size());
  g.reserve(samples.size());
  for (const auto& s : samples) {
    p.push_back(s.pred);
    g.push_back(s.gt);
  }
  const double mp = lower_median(std::move(p));
  if (!(mp > 0.0)) {
    throw std::domain_error("median_scale: non-positive predicted median");
  }
  return lower_median(std::move(g)) / mp;
}

ScaleStats global_scale_statistics(const std::vector<EvalPair>& pairs,
                                   const EvalOptions& options) {
  if (pairs.empty()) {
    throw std::invalid_argument("global_scale_statistics: empty pair list");
  }
  ScaleStats stats;
  stats.per_image_ratios.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    try {
      stats.per_image_ratios.push_back(
          median_scale(*pairs[i].pred, pairs[i].gt, options));
    } catch (const std::exception& e) {
      throw std::domain_error("image " + std::to_string(i) + ": " + e.what());
    }
  }
  for (double r : stats.per_image_ratios) stats.mean += r;
  stats.mean /= static_cast<double>(stats.per_image_ratios.size());
  for (double r : stats.per_image_ratios) {
    stats.stddev += (r - stats.mean) * (r - stats.mean);
  }
  stats.stddev =
      std::sqrt(stats.stddev / static_cast<double>(stats.per_image_ratios.size()));
  return stats;
}

DepthMap apply_scale(const DepthMap& pred, double c) {
  if (!(c > 0.0)) {
    throw std::invalid_argument("apply_scale: scale must be positive");
  }
  DepthMap out = pred;
  for (std::size_t i = 0; i < out.depth.size(); ++i) {
    if (out.valid[i]) out.depth[i] *= c;
  }
  return out;
}

std::string report_text(const MetricReport& r) {
  std::ostringstream os;
  os.precision(9);
  os << "silog " << r.silog << "\n";
  os << "silog_x1000 " << r.silog * 1000.0 << "\n";
  os << "abs_rel " << r.abs_rel << "\n";
  os << "sq_rel " << r.sq_rel << "\n";
  os << "rmse " << r.rmse << "\n";
  os << "rmse_log " << r.rmse_log << "\n";
  os << "mae " << r.mae << "\n";
  os << "irmse " << r.irmse << "\n";
  os << "delta1 " << r.delta1 << "\n";
  os << "delta2 " << r.delta2 << "\n";
  os << "delta3 " << r.delta3 << "\n";
  os << "image_count " << r.image_count << "\n";
  os << "evaluated_pixel_total " << r.evaluated_pixel_total << "\n";
  return os.str();
}

std::string report_json(const MetricReport& r) {
  nlohmann::json j{{"silog", r.silog},
                   {"silog_x1000", r.silog * 1000.0},
                   {"abs_rel", r.abs_rel},
                   {"sq_rel", r.sq_rel},
                   {"rmse", r.rmse},
                   {"rmse_log", r.rmse_log},
                   {"mae", r.mae},
                   {"irmse", r.irmse},
                   {"delta1", r.delta1},
                   {"delta2", r.delta2},
                   {"delta3", r.delta3},
                   {"image_count", r.image_count},
                   {"evaluated_pixel_total", r.evaluated_pixel_total}};
  return j.dump(2);
}

}  // namespace dk
