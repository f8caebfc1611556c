#pragma once
// Non-learned reference methods: first-frame interpolation and depth + pose
// box warping with optional estimator noise.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xview/geometry.hpp"

namespace xview {

enum class WarpMode { kCenter, kCorners };

struct WarpConfig {
  WarpMode mode = WarpMode::kCorners;
  double depth_noise_sigma = 0.0;  // multiplicative, per frame
  double pose_rot_sigma = 0.0;     // axis-angle radians, per frame
  double pose_trans_sigma = 0.0;   // world units, per frame
  std::uint64_t seed = 0;

  void validate() const;
};

// Named configurations: "warp_corners", "warp_center", "noisy-low", "noisy-high".
WarpConfig warp_preset(std::string_view name);
bool is_warp_method(std::string_view name);

BoxSequence interpolation_baseline(const BoxSequence& b_ref);

// Where the warp reads depth in the source view. With `object_depth` set, frame
// t uses object_depth[t] for every point of the box (the depth of the tracked
// object); otherwise each point is a bilinear lookup into `grid`.
struct DepthSource {
  const DepthGrid* grid = nullptr;
  std::span<const double> object_depth;
};

// Transfers boxes[t] from the camera src[t] to dst[t].
BoxSequence warp_boxes(const BoxSequence& boxes, std::span<const CameraPose> src,
                       std::span<const CameraPose> dst, const DepthSource& depth,
                       const Intrinsics& k, const WarpConfig& cfg);

// First-frame view to video view: source camera frozen at poses[0].
BoxSequence depth_warp(const BoxSequence& b_ref, const DepthGrid& depth0,
                       std::span<const CameraPose> poses, const Intrinsics& k,
                       const WarpConfig& cfg, std::span<const double> object_depth = {});

}  // namespace xview
