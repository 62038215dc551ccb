#include "dk/types.hpp"

#include <Eigen/LU>

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dk {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

void check_first(const ValidationResult& r) {
  if (!r.ok()) throw std::invalid_argument(r.violations.front().what);
}

}  // namespace

std::string ValidationResult::summary() const {
  if (ok()) return "ok";
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += v.what;
    if (v.index >= 0) out += " at index " + std::to_string(v.index);
  }
  return out;
}

ImageBuffer ImageBuffer::zeros(int height, int width, int channels) {
  require(height > 0 && width > 0, "image dimensions must be positive");
  require(channels == 1 || channels == 3, "channels must be 1 or 3");
  ImageBuffer img;
  img.height = height;
  img.width = width;
  img.channels = channels;
  img.data.assign(static_cast<std::size_t>(height) * width * channels, 0.0);
  return img;
}

ImageBuffer ImageBuffer::create(int height, int width, int channels,
                                std::vector<double> data) {
  ImageBuffer img;
  img.height = height;
  img.width = width;
  img.channels = channels;
  img.data = std::move(data);
  check_first(validate(img));
  return img;
}

DepthMap DepthMap::constant(int height, int width, double depth_m) {
  require(depth_m > 0.0 && std::isfinite(depth_m), "depth must be positive");
  DepthMap map;
  map.height = height;
  map.width = width;
  map.depth.assign(static_cast<std::size_t>(height) * width, depth_m);
  map.valid.assign(map.depth.size(), 1);
  check_first(validate(map));
  return map;
}

DepthMap DepthMap::create(int height, int width, std::vector<double> depth,
                          std::vector<std::uint8_t> valid) {
  DepthMap map;
  map.height = height;
  map.width = width;
  map.depth = std::move(depth);
  map.valid = std::move(valid);
  check_first(validate(map));
  return map;
}

std::size_t DepthMap::valid_count() const {
  std::size_t n = 0;
  for (auto v : valid) n += v != 0;
  return n;
}

DisparityMap DisparityMap::constant(int height, int width, double value) {
  DisparityMap map;
  map.height = height;
  map.width = width;
  map.x.assign(static_cast<std::size_t>(height) * width, value);
  check_first(validate(map));
  return map;
}

DisparityMap DisparityMap::create(int height, int width, std::vector<double> x) {
  DisparityMap map;
  map.height = height;
  map.width = width;
  map.x = std::move(x);
  check_first(validate(map));
  return map;
}

DepthRange::DepthRange(double d_min, double d_max, double s)
    : d_min_(d_min), d_max_(d_max), s_(s) {
  require(std::isfinite(d_min) && std::isfinite(d_max) && std::isfinite(s),
          "depth range parameters must be finite");
  require(d_min > 0.0 && d_min < d_max, "need 0 < d_min < d_max");
  require(s >= 1.0, "scale s must be >= 1");
  a_ = 1.0 / d_min_ - 1.0 / d_max_;
  b_ = 1.0 / d_max_;
}

Rigid3 Rigid3::create(const Eigen::Matrix3d& rotation,
                      const Eigen::Vector3d& translation) {
  Rigid3 pose;
  pose.rotation = rotation;
  pose.translation = translation;
  check_first(validate(pose));
  return pose;
}

SparseDepth SparseDepth::create(int height, int width,
                                std::vector<SparseSample> samples) {
  SparseDepth sparse;
  sparse.height = height;
  sparse.width = width;
  sparse.samples = std::move(samples);
  check_first(validate(sparse));
  return sparse;
}

ErrorMap ErrorMap::zeros(int height, int width) {
  ErrorMap map;
  map.height = height;
  map.width = width;
  map.err.assign(static_cast<std::size_t>(height) * width, 0.0);
  return map;
}

ErrorMap ErrorMap::create(int height, int width, std::vector<double> err) {
  ErrorMap map;
  map.height = height;
  map.width = width;
  map.err = std::move(err);
  check_first(validate(map));
  return map;
}

ValidationResult validate(const ImageBuffer& img) {
  ValidationResult r;
  if (img.height <= 0 || img.width <= 0) {
    r.violations.push_back({"non-positive image dimensions", -1});
    return r;
  }
  if (img.channels != 1 && img.channels != 3) {
    r.violations.push_back({"channels must be 1 or 3", -1});
    return r;
  }
  const std::size_t expect =
      static_cast<std::size_t>(img.height) * img.width * img.channels;
  if (img.data.size() != expect) {
    r.violations.push_back({"data length does not match dimensions", -1});
    return r;
  }
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const double v = img.data[i];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      r.violations.push_back(
          {"image value out of [0,1]", static_cast<std::ptrdiff_t>(i)});
    }
  }
  return r;
}

ValidationResult validate(const DepthMap& map) {
  ValidationResult r;
  if (map.height <= 0 || map.width <= 0) {
    r.violations.push_back({"non-positive map dimensions", -1});
    return r;
  }
  const std::size_t expect = static_cast<std::size_t>(map.height) * map.width;
  if (map.depth.size() != expect || map.valid.size() != expect) {
    r.violations.push_back({"buffer length does not match dimensions", -1});
    return r;
  }
  for (std::size_t i = 0; i < expect; ++i) {
    if (map.valid[i] == 0) continue;
    if (!std::isfinite(map.depth[i])) {
      r.violations.push_back(
          {"non-finite depth", static_cast<std::ptrdiff_t>(i)});
    } else if (map.depth[i] <= 0.0) {
      r.violations.push_back(
          {"non-positive depth", static_cast<std::ptrdiff_t>(i)});
    }
  }
  return r;
}

ValidationResult validate(const DisparityMap& map) {
  ValidationResult r;
  if (map.height <= 0 || map.width <= 0) {
    r.violations.push_back({"non-positive map dimensions", -1});
    return r;
  }
  if (map.x.size() != static_cast<std::size_t>(map.height) * map.width) {
    r.violations.push_back({"buffer length does not match dimensions", -1});
    return r;
  }
  for (std::size_t i = 0; i < map.x.size(); ++i) {
    const double v = map.x[i];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      r.violations.push_back(
          {"disparity out of [0,1]", static_cast<std::ptrdiff_t>(i)});
    }
  }
  return r;
}

ValidationResult validate(const DepthRange& range) {
  ValidationResult r;
  if (!(range.d_min() > 0.0 && range.d_min() < range.d_max()))
    r.violations.push_back({"need 0 < d_min < d_max", -1});
  if (!(range.s() >= 1.0)) r.violations.push_back({"scale s must be >= 1", -1});
  if (!(range.a() > 0.0 && range.b() > 0.0))
    r.violations.push_back({"derived coefficients must be positive", -1});
  return r;
}

ValidationResult validate(const CameraIntrinsics& intr) {
  ValidationResult r;
  if (!(intr.fx > 0.0) || !(intr.fy > 0.0))
    r.violations.push_back({"focal lengths must be positive", -1});
  if (!std::isfinite(intr.cx) || !std::isfinite(intr.cy))
    r.violations.push_back({"principal point must be finite", -1});
  return r;
}

ValidationResult validate(const Rigid3& pose) {
  ValidationResult r;
  const Eigen::Matrix3d gram =
      pose.rotation.transpose() * pose.rotation - Eigen::Matrix3d::Identity();
  if (gram.cwiseAbs().maxCoeff() > 1e-9)
    r.violations.push_back({"rotation is not orthonormal", -1});
  if (std::abs(pose.rotation.determinant() - 1.0) > 1e-9)
    r.violations.push_back({"rotation determinant is not +1", -1});
  if (!pose.translation.allFinite())
    r.violations.push_back({"translation must be finite", -1});
  return r;
}

ValidationResult validate(const MotionParams& motion) {
  ValidationResult r;
  if (!motion.axis_angle.allFinite() || !motion.translation.allFinite())
    r.violations.push_back({"motion parameters must be finite", -1});
  return r;
}

ValidationResult validate(const SparseDepth& sparse) {
  ValidationResult r;
  if (sparse.height <= 0 || sparse.width <= 0) {
    r.violations.push_back({"non-positive dimensions", -1});
    return r;
  }
  std::vector<std::uint8_t> seen(
      static_cast<std::size_t>(sparse.height) * sparse.width, 0);
  for (std::size_t i = 0; i < sparse.samples.size(); ++i) {
    const auto& s = sparse.samples[i];
    if (s.row < 0 || s.row >= sparse.height || s.col < 0 ||
        s.col >= sparse.width) {
      r.violations.push_back(
          {"sample out of bounds", static_cast<std::ptrdiff_t>(i)});
      continue;
    }
    if (!(s.depth > 0.0) || !std::isfinite(s.depth)) {
      r.violations.push_back(
          {"non-positive sample depth", static_cast<std::ptrdiff_t>(i)});
    }
    auto& flag = seen[flat_index(s.row, s.col, sparse.width)];
    if (flag) {
      r.violations.push_back(
          {"duplicate sample for pixel", static_cast<std::ptrdiff_t>(i)});
    }
    flag = 1;
  }
  return r;
}

ValidationResult validate(const ErrorMap& map) {
  ValidationResult r;
  if (map.height <= 0 || map.width <= 0) {
    r.violations.push_back({"non-positive map dimensions", -1});
    return r;
  }
  if (map.err.size() != static_cast<std::size_t>(map.height) * map.width) {
    r.violations.push_back({"buffer length does not match dimensions", -1});
    return r;
  }
  for (std::size_t i = 0; i < map.err.size(); ++i) {
    const double v = map.err[i];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      r.violations.push_back(
          {"error value out of [0,1]", static_cast<std::ptrdiff_t>(i)});
    }
  }
  return r;
}

ValidationResult validate(const PointCloud& cloud) {
  ValidationResult r;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (!cloud.points[i].allFinite()) {
      r.violations.push_back(
          {"non-finite point", static_cast<std::ptrdiff_t>(i)});
    }
  }
  return r;
}

}  // namespace dk
