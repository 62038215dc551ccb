#include "dk/conversion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dk {

double disparity_to_depth(double x, const DepthRange& range) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw std::out_of_range("disparity out of [0,1]: " + std::to_string(x));
  }
  return range.s() / (range.a() * x + range.b());
}

double depth_to_disparity(double depth, const DepthRange& range) {
  const double lo = range.s() * range.d_min();
  const double hi = range.s() * range.d_max();
  // Half-ulp slack so that the exact interval endpoints round-trip.
  const double slack = 4.0 * hi * std::numeric_limits<double>::epsilon();
  if (!(depth >= lo - slack && depth <= hi + slack)) {
    throw std::out_of_range("depth outside [s*d_min, s*d_max]: " +
                            std::to_string(depth));
  }
  const double x = (range.s() / depth - range.b()) / range.a();
  return std::min(1.0, std::max(0.0, x));
}

double clamp_depth_to_range(double depth, const DepthRange& range) {
  const double lo = range.s() * range.d_min();
  const double hi = range.s() * range.d_max();
  return std::min(hi, std::max(lo, depth));
}

DepthMap map_to_depth(const DisparityMap& x, const DepthRange& range) {
  DepthMap out;
  out.height = x.height;
  out.width = x.width;
  out.depth.resize(x.x.size());
  out.valid.assign(x.x.size(), 1);
  const double s = range.s(), a = range.a(), b = range.b();
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.x.size());
#pragma omp parallel for
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double xv = x.x[i];
    if (!(xv >= 0.0 && xv <= 1.0)) {
      out.depth[i] = std::numeric_limits<double>::quiet_NaN();
    } else {
      out.depth[i] = s / (a * xv + b);
    }
  }
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (std::isnan(out.depth[i])) {
      throw std::out_of_range("disparity out of [0,1] at pixel " +
                              std::to_string(i));
    }
  }
  return out;
}

DisparityMap map_to_disparity(const DepthMap& depth, const DepthRange& range) {
  DisparityMap out;
  out.height = depth.height;
  out.width = depth.width;
  out.x.resize(depth.depth.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(depth.depth.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (!depth.valid[i]) {
      throw std::invalid_argument("invalid pixel has no disparity, pixel " +
                                  std::to_string(i));
    }
  }
#pragma omp parallel for
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out.x[i] = -1.0;
    try {
      out.x[i] = depth_to_disparity(depth.depth[i], range);
    } catch (const std::out_of_range&) {
      // flagged below, outside the parallel region
    }
  }
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (out.x[i] < 0.0) {
      throw std::out_of_range("depth outside range at pixel " +
                              std::to_string(i));
    }
  }
  return out;
}

}  // namespace dk
