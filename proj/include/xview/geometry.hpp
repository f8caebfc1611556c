#pragma once
// Pinhole camera model, rigid poses, camera-path synthesis and paired
// static/dynamic rendering of a synthetic scene. All image coordinates are
// normalized: the frame is the unit square, x right, y down.

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace xview {

inline constexpr double kEpsilonZ = 1e-6;

struct Intrinsics {
  double fx = 0.9;
  double fy = 0.9;
  double cx = 0.5;
  double cy = 0.5;

  void validate() const;
};

// World-to-camera rigid transform: p_cam = rotation * p_world + translation.
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d to_camera(const Eigen::Vector3d& p_world) const {
    return rotation * p_world + translation;
  }
  Eigen::Vector3d to_world(const Eigen::Vector3d& p_cam) const {
    return rotation.transpose() * (p_cam - translation);
  }
  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }

  // Camera with the given optical center and camera-to-world rotation.
  static CameraPose from_center(const Eigen::Vector3d& center, const Eigen::Matrix3d& cam_to_world);

  bool operator==(const CameraPose&) const = default;
};

enum class PathKind { kStatic, kPan, kTruck, kDolly, kOrbit, kArc, kComposite };

inline constexpr std::array<PathKind, 6> kDynamicPathKinds = {
    PathKind::kPan, PathKind::kTruck, PathKind::kDolly,
    PathKind::kOrbit, PathKind::kArc, PathKind::kComposite};

std::string_view to_string(PathKind kind);
PathKind parse_path_kind(std::string_view name);

struct CameraPath {
  std::vector<CameraPose> poses;
  Intrinsics intrinsics;
  PathKind kind = PathKind::kStatic;
};

// Point the orbit family circles around; sits on the reference optical axis.
inline const Eigen::Vector3d kOrbitCentroid{0.0, 0.0, 6.0};

struct Box3D {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_extents = Eigen::Vector3d::Zero();
  double yaw = 0.0;  // rotation about world +y

  std::array<Eigen::Vector3d, 8> corners() const;
};

struct Box2D {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double x0() const { return cx - 0.5 * w; }
  double x1() const { return cx + 0.5 * w; }
  double y0() const { return cy - 0.5 * h; }
  double y1() const { return cy + 0.5 * h; }
  double area() const { return w * h; }
  bool valid() const;

  static Box2D from_corners(double x0, double y0, double x1, double y1);
  bool operator==(const Box2D&) const = default;
};

using BoxSequence = std::vector<Box2D>;

// G x G point tracks over T frames. Layout is row-major [gy][gx][t][xy].
struct TrackGrid {
  int grid_size = 0;
  int frames = 0;
  std::vector<double> xy;
  std::vector<std::uint8_t> visible;

  TrackGrid() = default;
  TrackGrid(int grid, int frames);

  std::size_t index(int gy, int gx, int t) const {
    return (static_cast<std::size_t>(gy) * grid_size + gx) * frames + t;
  }
  double& x(int gy, int gx, int t) { return xy[2 * index(gy, gx, t)]; }
  double& y(int gy, int gx, int t) { return xy[2 * index(gy, gx, t) + 1]; }
  double x(int gy, int gx, int t) const { return xy[2 * index(gy, gx, t)]; }
  double y(int gy, int gx, int t) const { return xy[2 * index(gy, gx, t) + 1]; }
  bool is_visible(int gy, int gx, int t) const { return visible[index(gy, gx, t)] != 0; }
};

// Regular grid of samples at pixel centers ((i + 0.5) / width, (j + 0.5) / height).
struct DepthGrid {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major [j][i]

  double at(int i, int j) const { return values[static_cast<std::size_t>(j) * width + i]; }
  // Bilinear interpolation; throws DepthLookupOutOfRange outside [0,1]^2.
  double sample(double u, double v) const;
};

// n . X = offset
struct Plane {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitY();
  double offset = 0.0;
};

struct Scene {
  std::vector<Plane> planes;         // floor, walls; static geometry
  std::vector<Box3D> landmarks;      // axis-aligned static boxes
  std::vector<Eigen::Vector3d> ground_points;
  std::vector<Box3D> object_path;    // one oriented box per frame
  double floor_y = 1.5;
  std::uint64_t seed = 0;

  int frames() const { return static_cast<int>(object_path.size()); }
};

Eigen::Vector2d project_point(const Eigen::Vector3d& p_world, const CameraPose& pose,
                              const Intrinsics& k, double epsilon_z = kEpsilonZ);
// Camera-frame point at normalized pixel (u, v) with camera depth z.
Eigen::Vector3d back_project(double u, double v, double z, const Intrinsics& k);

Box2D project_box3d(const Box3D& box, const CameraPose& pose, const Intrinsics& k,
                    double epsilon_z = kEpsilonZ);

CameraPath make_camera_path(PathKind kind, int frames, double magnitude, std::uint64_t seed,
                            const Intrinsics& k = {});

// Random room-like scene with one moving object; stationary objects are drawn
// with probability `stationary_probability`.
Scene make_scene(int frames, std::uint64_t seed, double stationary_probability = 0.1);

// A single fronto-parallel plane at world depth z with an object sliding
// across it; used for closed-form checks.
Scene make_planar_scene(int frames, double depth);

// Camera-frame depth of the first static surface hit by the ray through
// (u, v); nullopt when the ray escapes.
std::optional<double> scene_depth(const Scene& scene, const CameraPose& pose, const Intrinsics& k,
                                  double u, double v);

DepthGrid render_depth(const Scene& scene, const CameraPose& pose, const Intrinsics& k, int res);

struct RenderOptions {
  int grid = 12;
  int context_res = 16;
  int depth_res = 32;
};

struct RenderedPair {
  BoxSequence b_ref;
  BoxSequence b_tgt;
  TrackGrid tracks;
  DepthGrid depth0;
  DepthGrid context0;  // inverse depth
  // Camera depth of the object center in the frozen and moving views.
  std::vector<double> object_depth_ref;
  std::vector<double> object_depth_tgt;
};

RenderedPair render_pair(const Scene& scene, const CameraPath& path, const RenderOptions& opts = {});

Eigen::Matrix3d rot_x(double a);
Eigen::Matrix3d rot_y(double a);
Eigen::Matrix3d rot_z(double a);

}  // namespace xview
