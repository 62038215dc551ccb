#include "dk/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <png.h>

#include "dk/geometry.hpp"

namespace dk {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngRead {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngRead() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

struct PngWrite {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWrite() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

struct RawPng {
  int height = 0, width = 0, channels = 1, bit_depth = 8;
  std::vector<std::uint16_t> pixels;  // channel-interleaved, host order
};

RawPng read_png(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw std::runtime_error("cannot open PNG: " + path);

  PngRead ctx;
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                   nullptr);
  if (!ctx.png) throw std::runtime_error("png_create_read_struct failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw std::runtime_error("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(ctx.png))) {
    throw std::runtime_error("failed to decode PNG: " + path);
  }
  png_init_io(ctx.png, file.get());
  png_read_info(ctx.png, ctx.info);

  const png_byte color_type = png_get_color_type(ctx.png, ctx.info);
  const png_byte depth = png_get_bit_depth(ctx.png, ctx.info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(ctx.png);
  }
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(ctx.png);
  if (depth == 16) png_set_swap(ctx.png);  // host is little-endian
  png_read_update_info(ctx.png, ctx.info);

  RawPng out;
  out.width = static_cast<int>(png_get_image_width(ctx.png, ctx.info));
  out.height = static_cast<int>(png_get_image_height(ctx.png, ctx.info));
  out.bit_depth = png_get_bit_depth(ctx.png, ctx.info);
  out.channels = png_get_channels(ctx.png, ctx.info);

  const std::size_t row_bytes = png_get_rowbytes(ctx.png, ctx.info);
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(out.height) *
                                row_bytes);
  std::vector<png_bytep> rows(out.height);
  for (int r = 0; r < out.height; ++r) {
    rows[r] = raw.data() + static_cast<std::size_t>(r) * row_bytes;
  }
  png_read_image(ctx.png, rows.data());
  png_read_end(ctx.png, nullptr);

  const std::size_t count =
      static_cast<std::size_t>(out.height) * out.width * out.channels;
  out.pixels.resize(count);
  if (out.bit_depth == 16) {
    const std::uint16_t* src = reinterpret_cast<std::uint16_t*>(raw.data());
    std::copy(src, src + count, out.pixels.begin());
  } else {
    for (std::size_t i = 0; i < count; ++i) out.pixels[i] = raw[i];
  }
  return out;
}

void write_png16(const std::string& path, int height, int width, int channels,
                 const std::vector<std::uint16_t>& pixels) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw std::runtime_error("cannot open PNG for writing: " + path);

  PngWrite ctx;
  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                    nullptr);
  if (!ctx.png) throw std::runtime_error("png_create_write_struct failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw std::runtime_error("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(ctx.png))) {
    throw std::runtime_error("failed to encode PNG: " + path);
  }
  png_init_io(ctx.png, file.get());
  png_set_IHDR(ctx.png, ctx.info, width, height, 16,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx.png, ctx.info);
  png_set_swap(ctx.png);

  std::vector<png_bytep> rows(height);
  for (int r = 0; r < height; ++r) {
    rows[r] = reinterpret_cast<png_bytep>(const_cast<std::uint16_t*>(
        pixels.data() + static_cast<std::size_t>(r) * width * channels));
  }
  png_write_image(ctx.png, rows.data());
  png_write_end(ctx.png, nullptr);
}

void require_depth_layout(const RawPng& raw, const std::string& path) {
  if (raw.bit_depth != 16) {
    throw std::runtime_error(path + ": expected 16-bit PNG, got " +
                             std::to_string(raw.bit_depth) + "-bit");
  }
  if (raw.channels != 1) {
    throw std::runtime_error(path + ": expected single-channel PNG, got " +
                             std::to_string(raw.channels) + " channels");
  }
}

}  // namespace

DepthMap read_depth_png16(const std::string& path) {
  const RawPng raw = read_png(path);
  require_depth_layout(raw, path);
  DepthMap map;
  map.height = raw.height;
  map.width = raw.width;
  map.depth.resize(raw.pixels.size());
  map.valid.resize(raw.pixels.size());
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
    map.valid[i] = raw.pixels[i] != 0;
    map.depth[i] = raw.pixels[i] / 256.0;
  }
  return map;
}

void write_depth_png16(const std::string& path, const DepthMap& map) {
  std::vector<std::uint16_t> pixels(map.depth.size(), 0);
  for (std::size_t i = 0; i < map.depth.size(); ++i) {
    if (!map.valid[i]) continue;
    const double raw = std::round(map.depth[i] * 256.0);
    if (raw > 65535.0) {
      throw std::out_of_range(path + ": depth " + std::to_string(map.depth[i]) +
                              " m overflows the 16-bit encoding");
    }
    if (raw < 1.0) {
      throw std::out_of_range(path + ": depth " + std::to_string(map.depth[i]) +
                              " m underflows the 16-bit encoding");
    }
    pixels[i] = static_cast<std::uint16_t>(raw);
  }
  write_png16(path, map.height, map.width, 1, pixels);
}

ErrorMap read_error_map(const std::string& path) {
  const RawPng raw = read_png(path);
  require_depth_layout(raw, path);
  ErrorMap map;
  map.height = raw.height;
  map.width = raw.width;
  map.err.resize(raw.pixels.size());
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
    map.err[i] = raw.pixels[i] / 65535.0;
  }
  return map;
}

void write_error_map(const std::string& path, const ErrorMap& map) {
  std::vector<std::uint16_t> pixels(map.err.size());
  for (std::size_t i = 0; i < map.err.size(); ++i) {
    pixels[i] = static_cast<std::uint16_t>(std::lround(map.err[i] * 65535.0));
  }
  write_png16(path, map.height, map.width, 1, pixels);
}

ImageBuffer read_image_png(const std::string& path) {
  const RawPng raw = read_png(path);
  if (raw.channels != 1 && raw.channels != 3) {
    throw std::runtime_error(path + ": unsupported channel count " +
                             std::to_string(raw.channels));
  }
  ImageBuffer img;
  img.height = raw.height;
  img.width = raw.width;
  img.channels = raw.channels;
  img.data.resize(raw.pixels.size());
  const double scale = raw.bit_depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
    img.data[i] = raw.pixels[i] * scale;
  }
  return img;
}

void write_image_png(const std::string& path, const ImageBuffer& img) {
  std::vector<std::uint16_t> pixels(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const double v = std::min(1.0, std::max(0.0, img.data[i]));
    pixels[i] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
  }
  write_png16(path, img.height, img.width, img.channels, pixels);
}

namespace {

std::vector<std::vector<double>> read_numeric_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<std::vector<double>> lines;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::vector<double> values;
    double v;
    while (ss >> v) values.push_back(v);
    if (!values.empty()) lines.push_back(std::move(values));
  }
  return lines;
}

Rigid3 pose_from_values(const std::vector<double>& v, const std::string& path,
                        std::size_t record) {
  if (v.size() == 6) {
    MotionParams m;
    m.axis_angle = Eigen::Vector3d(v[0], v[1], v[2]);
    m.translation = Eigen::Vector3d(v[3], v[4], v[5]);
    return motion_to_rigid(m);
  }
  if (v.size() == 12) {
    Eigen::Matrix3d r;
    r << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
    const Eigen::Vector3d t(v[3], v[7], v[11]);
    const Eigen::Matrix3d gram =
        r.transpose() * r - Eigen::Matrix3d::Identity();
    if (gram.cwiseAbs().maxCoeff() > 1e-6 ||
        std::abs(r.determinant() - 1.0) > 1e-6) {
      throw std::runtime_error(path + ": record " + std::to_string(record) +
                               " rotation is not orthonormal");
    }
    // Snap to the nearest rotation.
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(
        r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d ortho = svd.matrixU() * svd.matrixV().transpose();
    if (ortho.determinant() < 0.0) {
      Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
      flip(2, 2) = -1.0;
      ortho = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    Rigid3 pose;
    pose.rotation = ortho;
    pose.translation = t;
    return pose;
  }
  throw std::runtime_error(path + ": record " + std::to_string(record) +
                           " has " + std::to_string(v.size()) +
                           " fields, expected 6 or 12");
}

}  // namespace

std::vector<Rigid3> read_pose_file(const std::string& path) {
  const auto lines = read_numeric_lines(path);
  std::vector<Rigid3> poses;
  poses.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    poses.push_back(pose_from_values(lines[i], path, i));
  }
  return poses;
}

void write_pose_file(const std::string& path, const std::vector<Rigid3>& poses,
                     PoseFormat format) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out.precision(17);
  for (const auto& pose : poses) {
    if (format == PoseFormat::kAxisAngle) {
      const MotionParams m = rigid_to_motion(pose);
      out << m.axis_angle.x() << ' ' << m.axis_angle.y() << ' '
          << m.axis_angle.z() << ' ' << m.translation.x() << ' '
          << m.translation.y() << ' ' << m.translation.z() << '\n';
    } else {
      for (int r = 0; r < 3; ++r) {
        out << pose.rotation(r, 0) << ' ' << pose.rotation(r, 1) << ' '
            << pose.rotation(r, 2) << ' ' << pose.translation[r]
            << (r == 2 ? '\n' : ' ');
      }
    }
  }
}

namespace {

std::string resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path.string() : (base / path).string();
}

void require_exists(const std::string& path, const std::string& manifest,
                    int line_no) {
  if (!std::filesystem::exists(path)) {
    throw std::runtime_error(manifest + ":" + std::to_string(line_no) +
                             ": file does not exist: " + path);
  }
}

}  // namespace

std::vector<SamplePair> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();

  std::vector<SamplePair> samples;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::vector<std::string> fields;
    std::string tok;
    while (ss >> tok) fields.push_back(tok);
    if (fields.empty()) continue;
    if (fields.size() < 8) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected at least 8 fields, got " +
                               std::to_string(fields.size()));
    }

    SamplePair s;
    s.image_k_path = resolve(base, fields[0]);
    s.image_next_path = resolve(base, fields[1]);
    try {
      s.intrinsics.fx = std::stod(fields[2]);
      s.intrinsics.fy = std::stod(fields[3]);
      s.intrinsics.cx = std::stod(fields[4]);
      s.intrinsics.cy = std::stod(fields[5]);
      s.pose_index = std::stoi(fields[7]);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed numeric field");
    }
    s.pose_file_path = resolve(base, fields[6]);

    require_exists(s.image_k_path, path, line_no);
    require_exists(s.image_next_path, path, line_no);
    require_exists(s.pose_file_path, path, line_no);

    auto optional_field = [&](std::size_t idx) -> std::optional<std::string> {
      if (fields.size() <= idx || fields[idx] == "-") return std::nullopt;
      std::string p = resolve(base, fields[idx]);
      require_exists(p, path, line_no);
      return p;
    };
    s.sparse_gt_path = optional_field(8);
    s.dense_depth_path = optional_field(9);
    s.error_map_path = optional_field(10);

    const std::vector<Rigid3> poses = read_pose_file(s.pose_file_path);
    if (s.pose_index < 0 ||
        s.pose_index >= static_cast<int>(poses.size())) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": pose index " + std::to_string(s.pose_index) +
                               " out of range");
    }
    s.ego = poses[s.pose_index];
    samples.push_back(std::move(s));
  }
  return samples;
}

LoadedSample load_sample(const SamplePair& sample) {
  LoadedSample out;
  out.image_k = read_image_png(sample.image_k_path);
  out.image_next = read_image_png(sample.image_next_path);
  out.intrinsics = sample.intrinsics;
  out.ego = sample.ego;
  if (out.image_k.height != out.image_next.height ||
      out.image_k.width != out.image_next.width ||
      out.image_k.channels != out.image_next.channels) {
    throw std::runtime_error(sample.image_k_path +
                             ": frame pair dimensions differ");
  }
  auto check_dims = [&](int h, int w, const std::string& p) {
    if (h != out.image_k.height || w != out.image_k.width) {
      throw std::runtime_error(p + ": dimensions differ from the frame pair");
    }
  };
  if (sample.sparse_gt_path) {
    out.sparse_gt = to_sparse(read_depth_png16(*sample.sparse_gt_path));
    check_dims(out.sparse_gt->height, out.sparse_gt->width,
               *sample.sparse_gt_path);
  }
  if (sample.dense_depth_path) {
    out.dense_depth = read_depth_png16(*sample.dense_depth_path);
    check_dims(out.dense_depth->height, out.dense_depth->width,
               *sample.dense_depth_path);
  }
  if (sample.error_map_path) {
    out.error_map = read_error_map(*sample.error_map_path);
    check_dims(out.error_map->height, out.error_map->width,
               *sample.error_map_path);
  }
  return out;
}

SparseDepth to_sparse(const DepthMap& map) {
  SparseDepth out;
  out.height = map.height;
  out.width = map.width;
  for (int r = 0; r < map.height; ++r) {
    for (int c = 0; c < map.width; ++c) {
      if (map.is_valid(r, c)) out.samples.push_back({r, c, map.at(r, c)});
    }
  }
  return out;
}

DepthMap to_depth_map(const SparseDepth& sparse) {
  DepthMap out;
  out.height = sparse.height;
  out.width = sparse.width;
  out.depth.assign(static_cast<std::size_t>(sparse.height) * sparse.width, 0.0);
  out.valid.assign(out.depth.size(), 0);
  for (const auto& s : sparse.samples) {
    const std::size_t i = flat_index(s.row, s.col, sparse.width);
    out.depth[i] = s.depth;
    out.valid[i] = 1;
  }
  return out;
}

}  // namespace dk
