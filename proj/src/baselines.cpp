#include "xview/baselines.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "xview/errors.hpp"

namespace xview {

void WarpConfig::validate() const {
  if (!(depth_noise_sigma >= 0.0) || !(pose_rot_sigma >= 0.0) || !(pose_trans_sigma >= 0.0)) {
    raise(ErrorCode::kInvalidArgument, "warp noise sigmas must be >= 0");
  }
}

WarpConfig warp_preset(std::string_view name) {
  WarpConfig cfg;
  if (name == "warp_corners") return cfg;
  if (name == "warp_center") {
    cfg.mode = WarpMode::kCenter;
    return cfg;
  }
  if (name == "noisy-low") {
    cfg.depth_noise_sigma = 0.08;
    cfg.pose_rot_sigma = 0.015;
    cfg.pose_trans_sigma = 0.05;
    return cfg;
  }
  if (name == "noisy-high") {
    cfg.depth_noise_sigma = 0.15;
    cfg.pose_rot_sigma = 0.03;
    cfg.pose_trans_sigma = 0.1;
    return cfg;
  }
  raise(ErrorCode::kInvalidArgument, "unknown warp method: " + std::string(name));
}

bool is_warp_method(std::string_view name) {
  return name == "warp_corners" || name == "warp_center" || name == "noisy-low" ||
         name == "noisy-high";
}

BoxSequence interpolation_baseline(const BoxSequence& b_ref) { return b_ref; }

namespace {

double lookup_depth(const DepthSource& d, std::size_t t, double u, double v) {
  if (!d.object_depth.empty()) return d.object_depth[t];
  if (d.grid == nullptr) raise(ErrorCode::kInvalidArgument, "warp needs a depth source");
  return d.grid->sample(u, v);
}

Eigen::Vector2d transfer(double u, double v, double z, const CameraPose& src,
                         const CameraPose& dst, const Intrinsics& k, double* z_dst) {
  const Eigen::Vector3d world = src.to_world(back_project(u, v, z, k));
  const Eigen::Vector3d pc = dst.to_camera(world);
  if (pc.z() <= kEpsilonZ) raise(ErrorCode::kNonPositiveDepth, "warped point behind camera");
  if (z_dst) *z_dst = pc.z();
  return {k.cx + k.fx * pc.x() / pc.z(), k.cy + k.fy * pc.y() / pc.z()};
}

}  // namespace

BoxSequence warp_boxes(const BoxSequence& boxes, std::span<const CameraPose> src,
                       std::span<const CameraPose> dst, const DepthSource& depth,
                       const Intrinsics& k, const WarpConfig& cfg) {
  cfg.validate();
  const std::size_t n = boxes.size();
  if (src.size() != n || dst.size() != n) {
    raise(ErrorCode::kLengthMismatch, "boxes and poses differ in length");
  }
  if (!depth.object_depth.empty() && depth.object_depth.size() != n) {
    raise(ErrorCode::kLengthMismatch, "object depth and boxes differ in length");
  }
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const bool noisy =
      cfg.depth_noise_sigma > 0.0 || cfg.pose_rot_sigma > 0.0 || cfg.pose_trans_sigma > 0.0;

  BoxSequence out(n);
  for (std::size_t t = 0; t < n; ++t) {
    CameraPose target = dst[t];
    double depth_scale = 1.0;
    if (noisy) {
      // Draws happen every frame so the stream stays aligned across configs.
      const Eigen::Vector3d axis(normal(rng), normal(rng), normal(rng));
      const Eigen::Vector3d shift(normal(rng), normal(rng), normal(rng));
      const double dz = normal(rng);
      if (!(src[t] == dst[t])) {
        const Eigen::Vector3d w = axis * cfg.pose_rot_sigma;
        const double angle = w.norm();
        if (angle > 0.0) {
          target.rotation = Eigen::AngleAxisd(angle, w / angle).toRotationMatrix() * target.rotation;
        }
        target.translation += shift * cfg.pose_trans_sigma;
        depth_scale = std::max(0.05, 1.0 + cfg.depth_noise_sigma * dz);
      }
    }
    const Box2D& b = boxes[t];
    if (cfg.mode == WarpMode::kCenter) {
      const double z0 = depth_scale * lookup_depth(depth, t, b.cx, b.cy);
      double zt = 0.0;
      const Eigen::Vector2d c = transfer(b.cx, b.cy, z0, src[t], target, k, &zt);
      const double s = z0 / zt;
      out[t] = Box2D{c.x(), c.y(), b.w * s, b.h * s};
    } else {
      double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
      double x1 = -x0, y1 = -x0;
      for (const auto& [u, v] : {std::pair{b.x0(), b.y0()}, std::pair{b.x1(), b.y0()},
                                  std::pair{b.x0(), b.y1()}, std::pair{b.x1(), b.y1()}}) {
        const double z = depth_scale * lookup_depth(depth, t, u, v);
        const Eigen::Vector2d p = transfer(u, v, z, src[t], target, k, nullptr);
        x0 = std::min(x0, p.x());
        x1 = std::max(x1, p.x());
        y0 = std::min(y0, p.y());
        y1 = std::max(y1, p.y());
      }
      out[t] = Box2D::from_corners(x0, y0, x1, y1);
    }
  }
  return out;
}

BoxSequence depth_warp(const BoxSequence& b_ref, const DepthGrid& depth0,
                       std::span<const CameraPose> poses, const Intrinsics& k,
                       const WarpConfig& cfg, std::span<const double> object_depth) {
  if (poses.empty()) raise(ErrorCode::kLengthMismatch, "no poses");
  const std::vector<CameraPose> src(poses.size(), poses.front());
  return warp_boxes(b_ref, src, poses, DepthSource{&depth0, object_depth}, k, cfg);
}

}  // namespace xview
