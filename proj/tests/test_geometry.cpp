#include <doctest.h>

#include <random>

#include "dk/geometry.hpp"
#include "dk/synth.hpp"
#include "helpers.hpp"

using namespace dk;

namespace {

MotionParams random_motion(std::mt19937& rng, double max_angle = M_PI - 0.05) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Eigen::Vector3d axis(unit(rng), unit(rng), unit(rng));
  axis.normalize();
  std::uniform_real_distribution<double> angle(0.0, max_angle);
  MotionParams m;
  m.axis_angle = axis * angle(rng);
  m.translation = Eigen::Vector3d(unit(rng), unit(rng), unit(rng)) * 5.0;
  return m;
}

Eigen::Matrix4d homogeneous(const Rigid3& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = t.rotation;
  m.topRightCorner<3, 1>() = t.translation;
  return m;
}

}  // namespace

TEST_CASE("zero motion is the identity") {
  const Rigid3 t = motion_to_rigid(MotionParams{});
  CHECK((t.rotation - Eigen::Matrix3d::Identity()).norm() == 0.0);
  CHECK(t.translation.norm() == 0.0);
}

TEST_CASE("quarter turn about z maps x to y") {
  MotionParams m;
  m.axis_angle = Eigen::Vector3d(0.0, 0.0, M_PI / 2.0);
  const Rigid3 t = motion_to_rigid(m);
  const Eigen::Vector3d rotated = t.rotation * Eigen::Vector3d(1, 0, 0);
  CHECK((rotated - Eigen::Vector3d(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("motion -> rigid -> motion round trip below pi") {
  std::mt19937 rng(21);
  for (int i = 0; i < 1000; ++i) {
    const MotionParams m = random_motion(rng);
    const MotionParams back = rigid_to_motion(motion_to_rigid(m));
    CHECK((back.axis_angle - m.axis_angle).norm() < 1e-9);
    CHECK((back.translation - m.translation).norm() == 0.0);
  }
}

TEST_CASE("log map near and at pi stays finite and round trips") {
  std::mt19937 rng(22);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (double angle : {M_PI - 1e-3, M_PI - 1e-7, M_PI - 1e-9, M_PI}) {
    for (int i = 0; i < 50; ++i) {
      Eigen::Vector3d axis(unit(rng), unit(rng), unit(rng));
      axis.normalize();
      MotionParams m;
      m.axis_angle = axis * angle;
      const Rigid3 t = motion_to_rigid(m);
      const MotionParams back = rigid_to_motion(t);
      CHECK(back.axis_angle.allFinite());
      CHECK(back.axis_angle.norm() <= M_PI + 1e-12);
      // At pi the axis sign is not observable; compare rotations.
      const Rigid3 again = motion_to_rigid(back);
      CHECK((again.rotation - t.rotation).norm() < 1e-7);
    }
  }
}

TEST_CASE("identity log map is exactly zero") {
  const MotionParams m = rigid_to_motion(Rigid3::identity());
  CHECK(m.axis_angle.norm() == 0.0);
  CHECK(m.translation.norm() == 0.0);
}

TEST_CASE("rotation log map recovers the quarter turn") {
  MotionParams m;
  m.axis_angle = Eigen::Vector3d(0.0, 0.0, M_PI / 2.0);
  const MotionParams back = rigid_to_motion(motion_to_rigid(m));
  CHECK((back.axis_angle - m.axis_angle).norm() < 1e-9);
}

TEST_CASE("compose and invert follow the homogeneous-matrix oracle") {
  std::mt19937 rng(23);
  const Rigid3 t = motion_to_rigid(random_motion(rng));
  const Rigid3 identity_composed = compose(Rigid3::identity(), t);
  CHECK((identity_composed.rotation - t.rotation).norm() == 0.0);

  Rigid3 shift;
  shift.translation = Eigen::Vector3d(1, 2, 3);
  const Rigid3 inv = invert(shift);
  CHECK((inv.translation - Eigen::Vector3d(-1, -2, -3)).norm() == 0.0);

  for (int i = 0; i < 200; ++i) {
    const Rigid3 a = motion_to_rigid(random_motion(rng));
    const Rigid3 b = motion_to_rigid(random_motion(rng));
    const Eigen::Matrix4d expected = homogeneous(a) * homogeneous(b);
    const Eigen::Matrix4d actual = homogeneous(compose(a, b));
    CHECK((expected - actual).cwiseAbs().maxCoeff() < 1e-12);

    const Eigen::Matrix4d round =
        homogeneous(compose(a, invert(a)));
    CHECK((round - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("back projection at the principal point and off axis") {
  const CameraIntrinsics centered{2.0, 2.0, 3.0, 2.0};
  DepthMap one = DepthMap::constant(5, 7, 5.0);
  for (std::size_t i = 0; i < one.valid.size(); ++i) one.valid[i] = 0;
  one.valid[flat_index(2, 3, 7)] = 1;
  const PointCloud pc = back_project(one, centered);
  REQUIRE(pc.points.size() == 1);
  CHECK((pc.points[0] - Eigen::Vector3d(0, 0, 5)).norm() == 0.0);

  const CameraIntrinsics unit{1.0, 1.0, 0.0, 0.0};
  DepthMap two = DepthMap::constant(5, 7, 2.0);
  for (std::size_t i = 0; i < two.valid.size(); ++i) two.valid[i] = 0;
  two.valid[flat_index(3, 2, 7)] = 1;  // col 2, row 3
  const PointCloud pc2 = back_project(two, unit);
  REQUIRE(pc2.points.size() == 1);
  CHECK((pc2.points[0] - Eigen::Vector3d(4, 6, 2)).norm() == 0.0);
}

TEST_CASE("transform points matches the homogeneous oracle") {
  std::mt19937 rng(24);
  std::uniform_real_distribution<double> unit(-5.0, 5.0);
  PointCloud pc;
  for (int i = 0; i < 100; ++i) {
    pc.points.emplace_back(unit(rng), unit(rng), unit(rng));
  }
  const PointCloud same = transform_points(Rigid3::identity(), pc);
  for (std::size_t i = 0; i < pc.points.size(); ++i) {
    CHECK((same.points[i] - pc.points[i]).norm() == 0.0);
  }

  Rigid3 lift;
  lift.translation = Eigen::Vector3d(0, 0, 1);
  const PointCloud lifted =
      transform_points(lift, PointCloud{{Eigen::Vector3d(0, 0, 5)}});
  CHECK((lifted.points[0] - Eigen::Vector3d(0, 0, 6)).norm() == 0.0);

  const Rigid3 t = motion_to_rigid(random_motion(rng));
  const PointCloud moved = transform_points(t, pc);
  for (std::size_t i = 0; i < pc.points.size(); ++i) {
    const Eigen::Vector4d h(pc.points[i].x(), pc.points[i].y(),
                            pc.points[i].z(), 1.0);
    const Eigen::Vector4d expected = homogeneous(t) * h;
    CHECK((moved.points[i] - expected.head<3>()).norm() < 1e-12);
  }
}

TEST_CASE("projection rounds to the nearest pixel and z-buffers collisions") {
  const CameraIntrinsics intr{1.0, 1.0, 3.0, 2.0};
  const SparseDepth single =
      project_points(PointCloud{{Eigen::Vector3d(0, 0, 5)}}, intr, 5, 7);
  REQUIRE(single.samples.size() == 1);
  CHECK(single.samples[0].row == 2);
  CHECK(single.samples[0].col == 3);
  CHECK(single.samples[0].depth == 5.0);

  PointCloud colliding;
  colliding.points.emplace_back(0, 0, 4);
  colliding.points.emplace_back(0, 0, 7);
  const SparseDepth kept = project_points(colliding, intr, 5, 7);
  REQUIRE(kept.samples.size() == 1);
  CHECK(kept.samples[0].depth == 4.0);

  PointCloud behind;
  behind.points.emplace_back(0, 0, -2);
  CHECK(project_points(behind, intr, 5, 7).samples.empty());
}

TEST_CASE("project after back-project reproduces the depth map") {
  const CameraIntrinsics intr{40.0, 40.0, 15.5, 11.5};
  const DepthMap map = dk::testing::random_depth_map(24, 32, 25, 2.0, 30.0, 0.7);
  const SparseDepth sparse = project_points(back_project(map, intr), intr, 24, 32);

  std::size_t valid = map.valid_count();
  CHECK(sparse.samples.size() == valid);
  for (const auto& s : sparse.samples) {
    CHECK(map.is_valid(s.row, s.col));
    CHECK(std::abs(s.depth - map.at(s.row, s.col)) < 1e-9);
  }
}

TEST_CASE("fusing a single identity frame is the identity") {
  const CameraIntrinsics intr{40.0, 40.0, 15.5, 11.5};
  const DepthMap map = dk::testing::random_depth_map(24, 32, 26, 2.0, 30.0, 0.4);
  SparseDepth sparse;
  sparse.height = 24;
  sparse.width = 32;
  for (int r = 0; r < 24; ++r) {
    for (int c = 0; c < 32; ++c) {
      if (map.is_valid(r, c)) sparse.samples.push_back({r, c, map.at(r, c)});
    }
  }
  const SparseDepth fused =
      fuse_sparse_frames({{sparse, Rigid3::identity()}}, intr);
  REQUIRE(fused.samples.size() == sparse.samples.size());
  for (std::size_t i = 0; i < fused.samples.size(); ++i) {
    CHECK(fused.samples[i].row == sparse.samples[i].row);
    CHECK(fused.samples[i].col == sparse.samples[i].col);
    CHECK(std::abs(fused.samples[i].depth - sparse.samples[i].depth) < 1e-9);
  }
}

TEST_CASE("fusing disjoint frames unions their samples") {
  const CameraIntrinsics intr{40.0, 40.0, 15.5, 11.5};
  SparseDepth a = SparseDepth::create(8, 8, {{0, 0, 5.0}, {2, 2, 6.0}});
  SparseDepth b = SparseDepth::create(8, 8, {{4, 4, 7.0}, {6, 6, 8.0}});
  const SparseDepth fused = fuse_sparse_frames(
      {{a, Rigid3::identity()}, {b, Rigid3::identity()}}, intr);
  CHECK(fused.samples.size() == 4);
}

TEST_CASE("empty fusion input yields an empty result") {
  const CameraIntrinsics intr{40.0, 40.0, 15.5, 11.5};
  const SparseDepth fused = fuse_sparse_frames({}, intr);
  CHECK(fused.samples.empty());
}

TEST_CASE("plane fusion from two poses grows density and stays consistent") {
  SparseFrameSpec spec;
  spec.frame_count = 2;
  const auto frames = make_sparse_plane_frames(spec);
  REQUIRE(frames.size() == 2);
  const SparseDepth fused = fuse_sparse_frames(frames, spec.intrinsics);
  CHECK(fused.samples.size() > frames[0].first.samples.size());
  CHECK(fused.samples.size() > frames[1].first.samples.size());
  for (const auto& s : fused.samples) {
    CHECK(std::abs(s.depth - spec.plane_depth) < 1e-6);
  }

  const SparseDepth reversed =
      fuse_sparse_frames({frames[1], frames[0]}, spec.intrinsics);
  REQUIRE(reversed.samples.size() == fused.samples.size());
  for (std::size_t i = 0; i < fused.samples.size(); ++i) {
    CHECK(reversed.samples[i].row == fused.samples[i].row);
    CHECK(reversed.samples[i].col == fused.samples[i].col);
    CHECK(reversed.samples[i].depth == fused.samples[i].depth);
  }
}

TEST_CASE("identity warp reproduces the source on the full mask") {
  const ImageBuffer src = dk::testing::smooth_texture(12, 16, 3, 27);
  const DepthMap depth = DepthMap::constant(12, 16, 4.0);
  const CameraIntrinsics intr{20.0, 20.0, 7.5, 5.5};
  const WarpResult warp = warp_image(src, depth, Rigid3::identity(), intr);
  for (int r = 0; r < 12; ++r) {
    for (int c = 0; c < 16; ++c) {
      CHECK(warp.mask[flat_index(r, c, 16)] == 1);
      for (int ch = 0; ch < 3; ++ch) {
        CHECK(std::abs(warp.warped.at(r, c, ch) - src.at(r, c, ch)) <= 1e-12);
      }
    }
  }
}

TEST_CASE("plane warp matches the analytically rendered target image") {
  PlaneSceneSpec spec;
  spec.height = 48;
  spec.width = 64;
  spec.plane_depth = 10.0;
  spec.intrinsics = {100.0, 100.0, 31.5, 23.5};
  spec.ego.translation = Eigen::Vector3d(0.1, 0.0, 0.0);
  const PlaneScene scene = make_plane_scene(spec);

  const WarpResult warp =
      warp_image(scene.frame_next, scene.depth_gt, scene.ego, scene.intrinsics);
  double max_err = 0.0;
  long covered = 0;
  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      const std::size_t i = flat_index(r, c, spec.width);
      if (!warp.mask[i]) continue;
      ++covered;
      max_err = std::max(max_err,
                         std::abs(warp.warped.data[i] - scene.frame_k.data[i]));
    }
  }
  CHECK(covered > spec.height * spec.width * 9 / 10);
  CHECK(max_err < 0.02);
}

TEST_CASE("points behind the camera mask the whole warp") {
  const ImageBuffer src = dk::testing::smooth_texture(8, 8, 1, 28);
  const DepthMap depth = DepthMap::constant(8, 8, 2.0);
  const CameraIntrinsics intr{10.0, 10.0, 3.5, 3.5};
  Rigid3 behind;
  behind.translation = Eigen::Vector3d(0.0, 0.0, -10.0);
  const WarpResult warp = warp_image(src, depth, behind, intr);
  for (std::size_t i = 0; i < warp.mask.size(); ++i) {
    CHECK(warp.mask[i] == 0);
    CHECK(warp.warped.data[i] == 0.0);
  }
}

TEST_CASE("invalid depth pixels are masked out of the warp") {
  const ImageBuffer src = dk::testing::smooth_texture(8, 8, 1, 29);
  DepthMap depth = DepthMap::constant(8, 8, 2.0);
  depth.valid[flat_index(3, 3, 8)] = 0;
  const CameraIntrinsics intr{10.0, 10.0, 3.5, 3.5};
  const WarpResult warp = warp_image(src, depth, Rigid3::identity(), intr);
  CHECK(warp.mask[flat_index(3, 3, 8)] == 0);
  CHECK(warp.warped.data[flat_index(3, 3, 8)] == 0.0);
  CHECK(warp.mask[flat_index(2, 2, 8)] == 1);
}
