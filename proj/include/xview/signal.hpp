#pragma once
// Trajectory signal processing: orthonormal DCT-II, keyframe interpolation and
// seeded perturbation of box sequences.

#include <cstdint>
#include <span>
#include <vector>

#include "xview/geometry.hpp"

namespace xview {

// Leading K orthonormal DCT-II coefficients of a length-T signal.
std::vector<double> dct_encode(std::span<const double> signal, int order);
// Inverse of dct_encode; coefficients beyond coeffs.size() are taken as zero.
std::vector<double> dct_decode(std::span<const double> coeffs, int length);

struct DctTrack {
  std::vector<double> coeffs_x;
  std::vector<double> coeffs_y;
  int order = 0;
  int length = 0;
};

// Per-track, per-coordinate encoding in row-major grid order. Invisible samples
// are forward-filled from the last visible position first.
std::vector<DctTrack> encode_trackgrid(const TrackGrid& tracks, int order);

// Flattened G^2 x 2K token matrix: [coeffs_x | coeffs_y] per track.
std::vector<double> dct_token_matrix(std::span<const DctTrack> tracks);

struct Keyframe {
  int frame_index = 0;
  Box2D box;
};

BoxSequence interpolate_keyframes(std::span<const Keyframe> keys, int frames);

BoxSequence perturb_sequence(const BoxSequence& seq, double sigma_jitter, double sigma_drift,
                             std::uint64_t seed);

}  // namespace xview
