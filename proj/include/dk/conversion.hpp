#pragma once

#include "dk/types.hpp"

namespace dk {

// d = s / (a*x + b) with a = 1/d_min - 1/d_max, b = 1/d_max.
// Strictly decreasing in x; range [s*d_min, s*d_max].
double disparity_to_depth(double x, const DepthRange& range);

// Exact algebraic inverse: x = (s/d - b) / a. Throws std::out_of_range for
// depths outside [s*d_min, s*d_max]; use clamp_depth_to_range first when
// clamping is intended.
double depth_to_disparity(double depth, const DepthRange& range);

double clamp_depth_to_range(double depth, const DepthRange& range);

DepthMap map_to_depth(const DisparityMap& x, const DepthRange& range);

// Requires every pixel valid; invalid pixels have no disparity encoding.
DisparityMap map_to_disparity(const DepthMap& depth, const DepthRange& range);

}  // namespace dk
