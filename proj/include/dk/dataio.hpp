#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dk/types.hpp"

namespace dk {

// File conventions:
//   depth PNG:  16-bit grayscale, meters*256, raw 0 = invalid pixel
//   error PNG:  16-bit grayscale, err*65535
//   image PNG:  8- or 16-bit grayscale or RGB, normalized to [0,1]
//   pose text:  6 reals (axis-angle, translation) or 12 reals (row-major
//               3x4 [R|t]) per line; '#' starts a comment
//   manifest:   img_k img_k1 fx fy cx cy pose_file pose_index
//               [sparse_gt] [dense_depth] [error_map], '-' = absent,
//               paths relative to the manifest directory

DepthMap read_depth_png16(const std::string& path);
void write_depth_png16(const std::string& path, const DepthMap& map);

ErrorMap read_error_map(const std::string& path);
void write_error_map(const std::string& path, const ErrorMap& map);

ImageBuffer read_image_png(const std::string& path);
void write_image_png(const std::string& path, const ImageBuffer& img);

enum class PoseFormat { kAxisAngle, kMatrix };

std::vector<Rigid3> read_pose_file(const std::string& path);
void write_pose_file(const std::string& path, const std::vector<Rigid3>& poses,
                     PoseFormat format = PoseFormat::kAxisAngle);

struct SamplePair {
  std::string image_k_path;
  std::string image_next_path;
  CameraIntrinsics intrinsics;
  std::string pose_file_path;
  int pose_index = 0;
  Rigid3 ego;  // pose_file_path[pose_index], loaded with the manifest
  std::optional<std::string> sparse_gt_path;
  std::optional<std::string> dense_depth_path;
  std::optional<std::string> error_map_path;
};

std::vector<SamplePair> read_manifest(const std::string& path);

// Everything a sample references, loaded and dimension-checked.
struct LoadedSample {
  ImageBuffer image_k;
  ImageBuffer image_next;
  CameraIntrinsics intrinsics;
  Rigid3 ego;
  std::optional<SparseDepth> sparse_gt;
  std::optional<DepthMap> dense_depth;
  std::optional<ErrorMap> error_map;
};

LoadedSample load_sample(const SamplePair& sample);

// Bridges between the dense and sparse depth representations.
SparseDepth to_sparse(const DepthMap& map);
DepthMap to_depth_map(const SparseDepth& sparse);

}  // namespace dk
