#include <cmath>

#include <Eigen/LU>

#include "doctest.h"
#include "xview/errors.hpp"
#include "xview/geometry.hpp"

using namespace xview;
using Eigen::Vector3d;

namespace {

const Intrinsics kUnit{1.0, 1.0, 0.5, 0.5};

}  // namespace

TEST_CASE("project_point follows the pinhole formula") {
  const CameraPose id;
  const auto p0 = project_point({0, 0, 2}, id, kUnit);
  CHECK(p0.x() == doctest::Approx(0.5));
  CHECK(p0.y() == doctest::Approx(0.5));
  const auto p1 = project_point({1, 0, 2}, id, kUnit);
  CHECK(p1.x() == doctest::Approx(0.5 + 1.0 / 2.0));
  CHECK(p1.y() == doctest::Approx(0.5));
  try {
    project_point({0, 0, -1}, id, kUnit);
    FAIL("expected NonPositiveDepth");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonPositiveDepth);
  }
  CHECK_THROWS_AS(project_point({0, 0, 1e-7}, id, kUnit), Error);
}

TEST_CASE("back projection inverts projection") {
  const CameraPose pose = CameraPose::from_center({0.3, -0.2, 0.5}, rot_y(0.2) * rot_x(-0.1));
  const Intrinsics k{0.9, 0.8, 0.45, 0.55};
  for (const Vector3d& p : {Vector3d(1, 2, 7), Vector3d(-3, 0.5, 4), Vector3d(0.1, -1, 12)}) {
    const auto uv = project_point(p, pose, k);
    const double z = pose.to_camera(p).z();
    const Vector3d back = pose.to_world(back_project(uv.x(), uv.y(), z, k));
    CHECK((back - p).norm() / p.norm() < 1e-7);
  }
}

TEST_CASE("project_box3d is the hull of the projected corners") {
  Box3D cube;
  cube.center = {0, 0, 4};
  cube.half_extents = {1, 1, 1};
  const Box2D b = project_box3d(cube, CameraPose{}, kUnit);
  CHECK(b.cx == doctest::Approx(0.5));
  CHECK(b.cy == doctest::Approx(0.5));
  CHECK(b.w == doctest::Approx(2.0 / 3.0));
  CHECK(b.h == doctest::Approx(2.0 / 3.0));

  Box3D point;
  point.center = {0, 0, 2};
  const Box2D pb = project_box3d(point, CameraPose{}, kUnit);
  CHECK(pb == Box2D{0.5, 0.5, 0.0, 0.0});

  // Camera shifted by +0.5 along x: brute-force every corner.
  CameraPose shifted;
  shifted.translation = {-0.5, 0, 0};
  double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
  for (const Vector3d& c : cube.corners()) {
    const Vector3d pc = c + shifted.translation;
    const double u = 0.5 + pc.x() / pc.z();
    const double v = 0.5 + pc.y() / pc.z();
    x0 = std::min(x0, u);
    x1 = std::max(x1, u);
    y0 = std::min(y0, v);
    y1 = std::max(y1, v);
  }
  const Box2D s = project_box3d(cube, shifted, kUnit);
  CHECK(s.x0() == doctest::Approx(x0));
  CHECK(s.x1() == doctest::Approx(x1));
  CHECK(s.y0() == doctest::Approx(y0));
  CHECK(s.y1() == doctest::Approx(y1));
  CHECK(s.cx < b.cx);
}

TEST_CASE("camera paths") {
  SUBCASE("static paths repeat the reference pose") {
    const CameraPath p = make_camera_path(PathKind::kStatic, 24, 1.0, 0);
    REQUIRE(p.poses.size() == 24);
    for (const CameraPose& pose : p.poses) CHECK(pose == CameraPose{});
  }
  SUBCASE("truck translates without rotating") {
    const CameraPath p = make_camera_path(PathKind::kTruck, 24, 1.0, 0);
    CHECK(p.poses.front() == CameraPose{});
    for (const CameraPose& pose : p.poses) {
      CHECK((pose.rotation - Eigen::Matrix3d::Identity()).norm() == 0.0);
      CHECK(pose.center().y() == 0.0);
      CHECK(pose.center().z() == 0.0);
    }
    CHECK(std::abs(p.poses.back().center().x()) > 0.1);
  }
  SUBCASE("orbit keeps the centroid on the optical axis") {
    const CameraPath p = make_camera_path(PathKind::kOrbit, 24, 1.3, 5);
    for (const CameraPose& pose : p.poses) {
      const auto uv = project_point(kOrbitCentroid, pose, p.intrinsics);
      CHECK(uv.x() == doctest::Approx(p.intrinsics.cx).epsilon(1e-12));
      CHECK(uv.y() == doctest::Approx(p.intrinsics.cy).epsilon(1e-12));
    }
  }
  SUBCASE("every family starts at the reference and stays orthonormal") {
    for (PathKind kind : kDynamicPathKinds) {
      const CameraPath p = make_camera_path(kind, 30, 1.5, 11);
      CHECK(p.poses.front() == CameraPose{});
      for (const CameraPose& pose : p.poses) {
        const Eigen::Matrix3d r = pose.rotation;
        CHECK((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(std::abs(r.determinant() - 1.0) < 1e-9);
      }
    }
  }
  SUBCASE("path names round-trip") {
    for (PathKind kind : kDynamicPathKinds) CHECK(parse_path_kind(to_string(kind)) == kind);
    try {
      parse_path_kind("spiral");
      FAIL("expected UnknownPathKind");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kUnknownPathKind);
    }
  }
}

TEST_CASE("render_pair") {
  const Scene scene = make_scene(24, 17);
  SUBCASE("views agree at frame 0") {
    for (PathKind kind : kDynamicPathKinds) {
      const RenderedPair pair = render_pair(scene, make_camera_path(kind, 24, 1.0, 3));
      CHECK(pair.b_ref[0] == pair.b_tgt[0]);
    }
  }
  SUBCASE("static paths give identical views and constant tracks") {
    const RenderedPair pair = render_pair(scene, make_camera_path(PathKind::kStatic, 24, 1.0, 3));
    for (int t = 0; t < 24; ++t) CHECK(pair.b_ref[t] == pair.b_tgt[t]);
    const TrackGrid& tg = pair.tracks;
    for (int gy = 0; gy < tg.grid_size; ++gy)
      for (int gx = 0; gx < tg.grid_size; ++gx)
        for (int t = 1; t < tg.frames; ++t) {
          CHECK(tg.x(gy, gx, t) == tg.x(gy, gx, 0));
          CHECK(tg.y(gy, gx, t) == tg.y(gy, gx, 0));
        }
  }
  SUBCASE("bit-deterministic") {
    const CameraPath path = make_camera_path(PathKind::kComposite, 24, 1.0, 9);
    const RenderedPair a = render_pair(make_scene(24, 17), path);
    const RenderedPair b = render_pair(make_scene(24, 17), path);
    CHECK(a.b_tgt == b.b_tgt);
    CHECK(a.tracks.xy == b.tracks.xy);
    CHECK(a.context0.values == b.context0.values);
  }
  SUBCASE("reference view freezes the camera") {
    const CameraPath path = make_camera_path(PathKind::kPan, 24, 1.0, 2);
    const RenderedPair pair = render_pair(scene, path);
    for (int t = 0; t < 24; ++t) {
      CHECK(pair.b_ref[t] == project_box3d(scene.object_path[t], CameraPose{}, path.intrinsics));
      CHECK(pair.b_tgt[t] == project_box3d(scene.object_path[t], path.poses[t], path.intrinsics));
    }
  }
}

TEST_CASE("planar scene under a lateral camera shift") {
  const double depth = 5.0;
  const Scene scene = make_planar_scene(24, depth);
  const CameraPath path = make_camera_path(PathKind::kTruck, 24, 1.0, 0);
  RenderOptions opts;
  opts.grid = 4;
  const RenderedPair pair = render_pair(scene, path, opts);
  const TrackGrid& tg = pair.tracks;
  for (int t = 1; t < 24; ++t) {
    const double dc = path.poses[t].center().x() - path.poses[t - 1].center().x();
    const double expected = -path.intrinsics.fx * dc / depth;
    for (int gy = 0; gy < 4; ++gy)
      for (int gx = 0; gx < 4; ++gx) {
        if (!tg.is_visible(gy, gx, t) || !tg.is_visible(gy, gx, t - 1)) continue;
        CHECK(tg.x(gy, gx, t) - tg.x(gy, gx, t - 1) == doctest::Approx(expected).epsilon(1e-9));
        CHECK(tg.y(gy, gx, t) == doctest::Approx(tg.y(gy, gx, t - 1)));
      }
  }
}

TEST_CASE("depth grid lookups") {
  DepthGrid d{2, 2, {1.0, 2.0, 3.0, 4.0}};
  CHECK(d.sample(0.25, 0.25) == doctest::Approx(1.0));
  CHECK(d.sample(0.5, 0.5) == doctest::Approx(2.5));
  CHECK(d.sample(0.0, 0.0) == doctest::Approx(1.0));
  try {
    d.sample(1.1, 0.5);
    FAIL("expected DepthLookupOutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDepthLookupOutOfRange);
  }
}

TEST_CASE("scene raycast depth equals camera depth of the hit") {
  const Scene scene = make_planar_scene(4, 7.0);
  const CameraPose pose = CameraPose::from_center({0.4, 0, 1.0}, Eigen::Matrix3d::Identity());
  const auto z = scene_depth(scene, pose, Intrinsics{}, 0.3, 0.6);
  REQUIRE(z.has_value());
  CHECK(*z == doctest::Approx(6.0));
}
