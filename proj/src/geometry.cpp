#include "xview/geometry.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "xview/errors.hpp"

namespace xview {

using Eigen::Matrix3d;
using Eigen::Vector3d;

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy) ||
      !std::isfinite(cx) || !std::isfinite(cy)) {
    raise(ErrorCode::kInvalidArgument, "intrinsics require fx, fy > 0 and finite principal point");
  }
}

CameraPose CameraPose::from_center(const Vector3d& center, const Matrix3d& cam_to_world) {
  CameraPose pose;
  pose.rotation = cam_to_world.transpose();
  pose.translation = -pose.rotation * center;
  return pose;
}

Matrix3d rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Matrix3d r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

Matrix3d rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Matrix3d r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

Matrix3d rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Matrix3d r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

std::string_view to_string(PathKind kind) {
  switch (kind) {
    case PathKind::kStatic: return "static";
    case PathKind::kPan: return "pan";
    case PathKind::kTruck: return "truck";
    case PathKind::kDolly: return "dolly";
    case PathKind::kOrbit: return "orbit";
    case PathKind::kArc: return "arc";
    case PathKind::kComposite: return "composite";
  }
  return "static";
}

PathKind parse_path_kind(std::string_view name) {
  for (PathKind k : {PathKind::kStatic, PathKind::kPan, PathKind::kTruck, PathKind::kDolly,
                     PathKind::kOrbit, PathKind::kArc, PathKind::kComposite}) {
    if (to_string(k) == name) return k;
  }
  raise(ErrorCode::kUnknownPathKind, std::string(name));
}

std::array<Vector3d, 8> Box3D::corners() const {
  const Matrix3d r = rot_y(yaw);
  std::array<Vector3d, 8> out;
  int i = 0;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1}) {
        const Vector3d local(sx * half_extents.x(), sy * half_extents.y(), sz * half_extents.z());
        out[i++] = center + r * local;
      }
  return out;
}

bool Box2D::valid() const {
  return std::isfinite(cx) && std::isfinite(cy) && std::isfinite(w) && std::isfinite(h) &&
         w >= 0.0 && h >= 0.0;
}

Box2D Box2D::from_corners(double x0, double y0, double x1, double y1) {
  return Box2D{0.5 * (x0 + x1), 0.5 * (y0 + y1), x1 - x0, y1 - y0};
}

TrackGrid::TrackGrid(int grid, int frames_)
    : grid_size(grid),
      frames(frames_),
      xy(static_cast<std::size_t>(grid) * grid * frames_ * 2, 0.0),
      visible(static_cast<std::size_t>(grid) * grid * frames_, 0) {}

double DepthGrid::sample(double u, double v) const {
  if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0)) {
    raise(ErrorCode::kDepthLookupOutOfRange,
          "depth lookup at (" + std::to_string(u) + ", " + std::to_string(v) + ")");
  }
  const double x = std::clamp(u * width - 0.5, 0.0, static_cast<double>(width - 1));
  const double y = std::clamp(v * height - 0.5, 0.0, static_cast<double>(height - 1));
  const int i0 = static_cast<int>(std::floor(x));
  const int j0 = static_cast<int>(std::floor(y));
  const int i1 = std::min(i0 + 1, width - 1);
  const int j1 = std::min(j0 + 1, height - 1);
  const double ax = x - i0;
  const double ay = y - j0;
  const double top = (1.0 - ax) * at(i0, j0) + ax * at(i1, j0);
  const double bottom = (1.0 - ax) * at(i0, j1) + ax * at(i1, j1);
  return (1.0 - ay) * top + ay * bottom;
}

Eigen::Vector2d project_point(const Vector3d& p_world, const CameraPose& pose, const Intrinsics& k,
                              double epsilon_z) {
  const Vector3d pc = pose.to_camera(p_world);
  if (!(pc.z() > epsilon_z)) {
    raise(ErrorCode::kNonPositiveDepth, "camera depth " + std::to_string(pc.z()));
  }
  return {k.cx + k.fx * pc.x() / pc.z(), k.cy + k.fy * pc.y() / pc.z()};
}

Vector3d back_project(double u, double v, double z, const Intrinsics& k) {
  return {(u - k.cx) / k.fx * z, (v - k.cy) / k.fy * z, z};
}

Box2D project_box3d(const Box3D& box, const CameraPose& pose, const Intrinsics& k,
                    double epsilon_z) {
  double x0 = std::numeric_limits<double>::infinity();
  double y0 = x0;
  double x1 = -x0;
  double y1 = -x0;
  for (const Vector3d& c : box.corners()) {
    const Eigen::Vector2d p = project_point(c, pose, k, epsilon_z);
    x0 = std::min(x0, p.x());
    x1 = std::max(x1, p.x());
    y0 = std::min(y0, p.y());
    y1 = std::max(y1, p.y());
  }
  return Box2D::from_corners(x0, y0, x1, y1);
}

namespace {

double signed_unit(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.5 ? -1.0 : 1.0;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Pose along a path family at normalized time s in [0, 1].
struct PathShape {
  PathKind kind;
  double magnitude;
  double sign = 1.0;
  std::array<double, 6> mix{};  // composite coefficients in [-1, 1]

  CameraPose at(double s) const {
    const double m = magnitude * sign;
    switch (kind) {
      case PathKind::kStatic:
        return {};
      case PathKind::kPan:
        return CameraPose::from_center(Vector3d::Zero(), rot_y(0.12 * m * s));
      case PathKind::kTruck:
        return CameraPose::from_center(Vector3d(0.8 * m * s, 0.0, 0.0), Matrix3d::Identity());
      case PathKind::kDolly:
        return CameraPose::from_center(Vector3d(0.0, 0.0, 1.5 * m * s), Matrix3d::Identity());
      case PathKind::kOrbit: {
        const Matrix3d r = rot_y(0.25 * m * s);
        return CameraPose::from_center(kOrbitCentroid - r * kOrbitCentroid, r);
      }
      case PathKind::kArc: {
        const Vector3d pivot(0.0, 0.0, 12.0);
        const double phi = 0.12 * m * s;
        return CameraPose::from_center(pivot - rot_y(phi) * pivot, rot_y(0.5 * phi));
      }
      case PathKind::kComposite: {
        const double e = s * s * (3.0 - 2.0 * s);  // smoothstep
        const Matrix3d r = rot_y(0.08 * magnitude * mix[0] * e) *
                           rot_x(0.05 * magnitude * mix[1] * e) *
                           rot_z(0.05 * magnitude * mix[2] * e);
        const Vector3d c(0.5 * magnitude * mix[3] * e, 0.2 * magnitude * mix[4] * e,
                         0.8 * magnitude * mix[5] * e);
        return CameraPose::from_center(c, r);
      }
    }
    return {};
  }
};

}  // namespace

CameraPath make_camera_path(PathKind kind, int frames, double magnitude, std::uint64_t seed,
                            const Intrinsics& k) {
  if (frames < 2) raise(ErrorCode::kInvalidArgument, "camera path needs at least 2 frames");
  if (!(magnitude >= 0.0)) raise(ErrorCode::kInvalidArgument, "magnitude must be >= 0");
  k.validate();
  const int kind_index = static_cast<int>(kind);
  if (kind_index < 0 || kind_index > static_cast<int>(PathKind::kComposite)) {
    raise(ErrorCode::kUnknownPathKind, std::to_string(kind_index));
  }

  std::mt19937_64 rng(seed);
  PathShape shape{kind, magnitude};
  shape.sign = signed_unit(rng);
  for (double& c : shape.mix) c = uniform(rng, -1.0, 1.0);

  CameraPath path;
  path.kind = kind;
  path.intrinsics = k;
  path.poses.reserve(frames);
  path.poses.emplace_back();  // canonical reference pose
  for (int t = 1; t < frames; ++t) {
    path.poses.push_back(shape.at(static_cast<double>(t) / (frames - 1)));
  }
  return path;
}

Scene make_scene(int frames, std::uint64_t seed, double stationary_probability) {
  if (frames < 2) raise(ErrorCode::kInvalidArgument, "scene needs at least 2 frames");
  std::mt19937_64 rng(seed);
  Scene scene;
  scene.seed = seed;
  scene.floor_y = 1.5;
  scene.planes = {
      {Vector3d::UnitY(), scene.floor_y},   // floor
      {Vector3d::UnitY(), -6.0},            // ceiling
      {Vector3d::UnitZ(), 25.0},            // back wall
      {Vector3d::UnitZ(), -8.0},            // wall behind the camera
      {Vector3d::UnitX(), 12.0},
      {Vector3d::UnitX(), -12.0},
  };

  const int landmarks = std::uniform_int_distribution<int>(4, 8)(rng);
  for (int i = 0; i < landmarks; ++i) {
    Box3D b;
    b.half_extents = Vector3d(uniform(rng, 0.3, 1.5), uniform(rng, 0.3, 2.0), uniform(rng, 0.3, 1.5));
    b.center = Vector3d(uniform(rng, -8.0, 8.0), scene.floor_y - b.half_extents.y(),
                        uniform(rng, 9.0, 20.0));
    scene.landmarks.push_back(b);
  }
  for (int i = 0; i < 64; ++i) {
    scene.ground_points.emplace_back(uniform(rng, -8.0, 8.0), scene.floor_y, uniform(rng, 3.0, 20.0));
  }

  Box3D obj;
  obj.half_extents = Vector3d(uniform(rng, 0.25, 0.6), uniform(rng, 0.3, 0.8), uniform(rng, 0.25, 0.6));
  const double x0 = uniform(rng, -1.8, 1.8);
  const double z0 = uniform(rng, 4.5, 8.5);
  // Mostly lateral headings; motion straight along the optical axis barely
  // moves the box.
  double heading = uniform(rng, M_PI / 6.0, 5.0 * M_PI / 6.0);
  if (uniform(rng, 0.0, 1.0) < 0.5) heading = -heading;
  const bool stationary = uniform(rng, 0.0, 1.0) < stationary_probability;
  const double distance = stationary ? 0.0 : uniform(rng, 0.8, 2.5);
  const double bend = uniform(rng, -0.6, 0.6);
  // Keep the end point comfortably in front of the camera.
  if (z0 + distance * std::cos(heading) < 3.5) heading = M_PI - heading;
  const Eigen::Vector2d dir(std::sin(heading), std::cos(heading));
  const Eigen::Vector2d perp(dir.y(), -dir.x());
  for (int t = 0; t < frames; ++t) {
    const double s = static_cast<double>(t) / (frames - 1);
    const Eigen::Vector2d p =
        Eigen::Vector2d(x0, z0) + distance * (s * dir + bend * s * (1.0 - s) * perp);
    Box3D b = obj;
    b.center = Vector3d(p.x(), scene.floor_y - obj.half_extents.y(), p.y());
    b.yaw = heading;
    scene.object_path.push_back(b);
  }
  return scene;
}

Scene make_planar_scene(int frames, double depth) {
  Scene scene;
  scene.planes = {{Vector3d::UnitZ(), depth}};
  scene.floor_y = 1.0;
  for (int t = 0; t < frames; ++t) {
    const double s = frames > 1 ? static_cast<double>(t) / (frames - 1) : 0.0;
    Box3D b;
    b.half_extents = Vector3d(0.4, 0.4, 1e-3);
    b.center = Vector3d(-1.0 + 2.0 * s, 0.0, depth - 0.01);
    scene.object_path.push_back(b);
  }
  return scene;
}

namespace {

// Ray/AABB slab test; returns entry parameter when positive.
std::optional<double> hit_box(const Box3D& b, const Vector3d& origin, const Vector3d& dir) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double lo = b.center[a] - b.half_extents[a];
    const double hi = b.center[a] + b.half_extents[a];
    if (std::abs(dir[a]) < 1e-15) {
      if (origin[a] < lo || origin[a] > hi) return std::nullopt;
      continue;
    }
    double t0 = (lo - origin[a]) / dir[a];
    double t1 = (hi - origin[a]) / dir[a];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return std::nullopt;
  }
  if (t_near > kEpsilonZ) return t_near;
  return std::nullopt;
}

}  // namespace

std::optional<double> scene_depth(const Scene& scene, const CameraPose& pose, const Intrinsics& k,
                                  double u, double v) {
  // With the direction scaled to unit camera depth, the ray parameter equals
  // the camera-frame depth of the hit.
  const Vector3d origin = pose.center();
  const Vector3d dir = pose.rotation.transpose() * back_project(u, v, 1.0, k);
  double best = std::numeric_limits<double>::infinity();
  for (const Plane& p : scene.planes) {
    const double denom = p.normal.dot(dir);
    if (std::abs(denom) < 1e-15) continue;
    const double s = (p.offset - p.normal.dot(origin)) / denom;
    if (s > kEpsilonZ) best = std::min(best, s);
  }
  for (const Box3D& b : scene.landmarks) {
    if (auto s = hit_box(b, origin, dir)) best = std::min(best, *s);
  }
  if (!std::isfinite(best)) return std::nullopt;
  return best;
}

DepthGrid render_depth(const Scene& scene, const CameraPose& pose, const Intrinsics& k, int res) {
  DepthGrid grid{res, res, std::vector<double>(static_cast<std::size_t>(res) * res, 0.0)};
  for (int j = 0; j < res; ++j) {
    for (int i = 0; i < res; ++i) {
      const auto z = scene_depth(scene, pose, k, (i + 0.5) / res, (j + 0.5) / res);
      grid.values[static_cast<std::size_t>(j) * res + i] = z.value_or(1e3);
    }
  }
  return grid;
}

RenderedPair render_pair(const Scene& scene, const CameraPath& path, const RenderOptions& opts) {
  const int frames = scene.frames();
  if (frames != static_cast<int>(path.poses.size())) {
    raise(ErrorCode::kLengthMismatch, "scene and camera path frame counts differ");
  }
  if (opts.grid < 1) raise(ErrorCode::kInvalidArgument, "track grid must be >= 1");
  const Intrinsics& k = path.intrinsics;
  const CameraPose& ref = path.poses.front();

  RenderedPair out;
  out.b_ref.reserve(frames);
  out.b_tgt.reserve(frames);
  try {
    for (int t = 0; t < frames; ++t) {
      const Box3D& obj = scene.object_path[t];
      out.b_ref.push_back(project_box3d(obj, ref, k));
      out.b_tgt.push_back(project_box3d(obj, path.poses[t], k));
      out.object_depth_ref.push_back(ref.to_camera(obj.center).z());
      out.object_depth_tgt.push_back(path.poses[t].to_camera(obj.center).z());
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kNonPositiveDepth) {
      raise(ErrorCode::kObjectNotVisible, e.what());
    }
    throw;
  }

  const int g = opts.grid;
  out.tracks = TrackGrid(g, frames);
  for (int gy = 0; gy < g; ++gy) {
    for (int gx = 0; gx < g; ++gx) {
      const double u = (gx + 0.5) / g;
      const double v = (gy + 0.5) / g;
      const auto depth = scene_depth(scene, ref, k, u, v);
      double px = u;
      double py = v;
      for (int t = 0; t < frames; ++t) {
        bool vis = false;
        if (depth) {
          const Vector3d world = ref.to_world(back_project(u, v, *depth, k));
          const Vector3d pc = path.poses[t].to_camera(world);
          if (pc.z() > kEpsilonZ) {
            px = k.cx + k.fx * pc.x() / pc.z();
            py = k.cy + k.fy * pc.y() / pc.z();
            vis = px >= -0.25 && px <= 1.25 && py >= -0.25 && py <= 1.25;
          }
        }
        out.tracks.x(gy, gx, t) = px;
        out.tracks.y(gy, gx, t) = py;
        out.tracks.visible[out.tracks.index(gy, gx, t)] = vis ? 1 : 0;
      }
    }
  }

  out.depth0 = render_depth(scene, ref, k, opts.depth_res);
  out.context0 = render_depth(scene, ref, k, opts.context_res);
  for (double& z : out.context0.values) z = 1.0 / z;
  return out;
}

}  // namespace xview
