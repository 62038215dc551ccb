#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dk {

// Shared buffer convention: row-major, index = (row*width + col)*channels +
// channel. Values are treated as immutable once constructed: share freely
// across threads for reading, mutate only by building a new value.
inline std::size_t flat_index(int row, int col, int width, int channels = 1,
                              int channel = 0) {
  return (static_cast<std::size_t>(row) * width + col) * channels + channel;
}

struct Violation {
  std::string what;
  std::ptrdiff_t index = -1;  // flat pixel/sample index, -1 when not pixel-specific
};

struct ValidationResult {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

// Image values live in linear [0,1], grayscale (1 channel) or RGB (3 channels).
struct ImageBuffer {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> data;

  static ImageBuffer zeros(int height, int width, int channels = 1);
  // Validates all invariants; throws std::invalid_argument on breach.
  static ImageBuffer create(int height, int width, int channels,
                            std::vector<double> data);

  double at(int row, int col, int channel = 0) const {
    return data[flat_index(row, col, width, channels, channel)];
  }
  double& at(int row, int col, int channel = 0) {
    return data[flat_index(row, col, width, channels, channel)];
  }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(height) * width;
  }
};

// Metric depth with an explicit validity mask; invalid pixels are excluded
// from every reduction and never encoded as sentinel depth values.
struct DepthMap {
  int height = 0;
  int width = 0;
  std::vector<double> depth;
  std::vector<std::uint8_t> valid;

  static DepthMap constant(int height, int width, double depth_m);
  static DepthMap create(int height, int width, std::vector<double> depth,
                         std::vector<std::uint8_t> valid);

  double at(int row, int col) const { return depth[flat_index(row, col, width)]; }
  bool is_valid(int row, int col) const {
    return valid[flat_index(row, col, width)] != 0;
  }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(height) * width;
  }
  std::size_t valid_count() const;
};

// Per-pixel network-style output x in [0,1].
struct DisparityMap {
  int height = 0;
  int width = 0;
  std::vector<double> x;

  static DisparityMap constant(int height, int width, double value);
  static DisparityMap create(int height, int width, std::vector<double> x);

  double at(int row, int col) const { return x[flat_index(row, col, width)]; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(height) * width;
  }
};

// Depth interval plus learning scale s; derived coefficients of the
// disparity relation d = s/(a*x + b), a = 1/d_min - 1/d_max, b = 1/d_max.
class DepthRange {
 public:
  // Defaults: range [0.1, 100] with s = 32.
  DepthRange() : DepthRange(0.1, 100.0, 32.0) {}
  DepthRange(double d_min, double d_max, double s);  // throws on bad interval

  double d_min() const { return d_min_; }
  double d_max() const { return d_max_; }
  double s() const { return s_; }
  double a() const { return a_; }
  double b() const { return b_; }

 private:
  double d_min_, d_max_, s_, a_, b_;
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

// SE(3) pose. Rotation must be orthonormal with det +1 (checked to 1e-9
// by create()).
struct Rigid3 {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Rigid3 identity() { return {}; }
  static Rigid3 create(const Eigen::Matrix3d& rotation,
                       const Eigen::Vector3d& translation);
};

// 6-parameter motion encoding: axis-angle rotation + translation.
struct MotionParams {
  Eigen::Vector3d axis_angle = Eigen::Vector3d::Zero();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Matrix<double, 6, 1> as_vector() const {
    Eigen::Matrix<double, 6, 1> v;
    v << axis_angle, translation;
    return v;
  }
};

struct SparseSample {
  int row = 0;
  int col = 0;
  double depth = 0.0;
};

// Sparse per-pixel depth samples (LIDAR-style). At most one sample per pixel;
// samples kept sorted in row-major scan order.
struct SparseDepth {
  int height = 0;
  int width = 0;
  std::vector<SparseSample> samples;

  static SparseDepth create(int height, int width,
                            std::vector<SparseSample> samples);
};

// Per-pixel error probability in [0,1]; 0 = fully trusted.
struct ErrorMap {
  int height = 0;
  int width = 0;
  std::vector<double> err;

  static ErrorMap zeros(int height, int width);
  static ErrorMap create(int height, int width, std::vector<double> err);

  double at(int row, int col) const { return err[flat_index(row, col, width)]; }
};

struct PointCloud {
  std::vector<Eigen::Vector3d> points;
};

ValidationResult validate(const ImageBuffer& img);
ValidationResult validate(const DepthMap& map);
ValidationResult validate(const DisparityMap& map);
ValidationResult validate(const DepthRange& range);
ValidationResult validate(const CameraIntrinsics& intr);
ValidationResult validate(const Rigid3& pose);
ValidationResult validate(const MotionParams& motion);
ValidationResult validate(const SparseDepth& sparse);
ValidationResult validate(const ErrorMap& map);
ValidationResult validate(const PointCloud& cloud);

}  // namespace dk
