#include "xview/signal.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "xview/errors.hpp"
#include "xview/kernels.hpp"

namespace xview {
namespace {

// Row k of the orthonormal DCT-II basis at length T.
std::vector<double> basis_row(int k, int length) {
  std::vector<double> row(length);
  const double norm = std::sqrt(2.0 / length) * (k == 0 ? 1.0 / std::sqrt(2.0) : 1.0);
  for (int n = 0; n < length; ++n) {
    row[n] = norm * std::cos(M_PI * (2.0 * n + 1.0) * k / (2.0 * length));
  }
  return row;
}

void check_order(int order, int length) {
  if (length < 1 || order < 1 || order > length) {
    raise(ErrorCode::kInvalidOrder,
          "order " + std::to_string(order) + " outside [1, " + std::to_string(length) + "]");
  }
}

}  // namespace

std::vector<double> dct_encode(std::span<const double> signal, int order) {
  const int length = static_cast<int>(signal.size());
  check_order(order, length);
  std::vector<double> out(order);
  for (int k = 0; k < order; ++k) {
    const std::vector<double> row = basis_row(k, length);
    out[k] = kernels::dot<double>(length, row.data(), signal.data());
  }
  return out;
}

std::vector<double> dct_decode(std::span<const double> coeffs, int length) {
  check_order(static_cast<int>(coeffs.size()), length);
  std::vector<double> out(length, 0.0);
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    const std::vector<double> row = basis_row(static_cast<int>(k), length);
    kernels::axpy<double>(length, coeffs[k], row.data(), out.data());
  }
  return out;
}

std::vector<DctTrack> encode_trackgrid(const TrackGrid& tracks, int order) {
  check_order(order, tracks.frames);
  const int g = tracks.grid_size;
  std::vector<DctTrack> out;
  out.reserve(static_cast<std::size_t>(g) * g);
  std::vector<double> xs(tracks.frames), ys(tracks.frames);
  for (int gy = 0; gy < g; ++gy) {
    for (int gx = 0; gx < g; ++gx) {
      // Seed the fill with the first visible sample so leading gaps are finite.
      double last_x = tracks.x(gy, gx, 0);
      double last_y = tracks.y(gy, gx, 0);
      for (int t = 0; t < tracks.frames; ++t) {
        if (tracks.is_visible(gy, gx, t)) {
          last_x = tracks.x(gy, gx, t);
          last_y = tracks.y(gy, gx, t);
          break;
        }
      }
      for (int t = 0; t < tracks.frames; ++t) {
        if (tracks.is_visible(gy, gx, t)) {
          last_x = tracks.x(gy, gx, t);
          last_y = tracks.y(gy, gx, t);
        }
        xs[t] = last_x;
        ys[t] = last_y;
      }
      out.push_back({dct_encode(xs, order), dct_encode(ys, order), order, tracks.frames});
    }
  }
  return out;
}

std::vector<double> dct_token_matrix(std::span<const DctTrack> tracks) {
  std::vector<double> out;
  if (tracks.empty()) return out;
  out.reserve(tracks.size() * 2 * tracks.front().order);
  for (const DctTrack& t : tracks) {
    out.insert(out.end(), t.coeffs_x.begin(), t.coeffs_x.end());
    out.insert(out.end(), t.coeffs_y.begin(), t.coeffs_y.end());
  }
  return out;
}

BoxSequence interpolate_keyframes(std::span<const Keyframe> keys, int frames) {
  if (keys.empty()) raise(ErrorCode::kEmptyKeys, "no keyframes");
  if (frames < 1) raise(ErrorCode::kInvalidArgument, "frame count must be >= 1");
  if (keys.front().frame_index != 0) {
    raise(ErrorCode::kKeyOutOfRange, "first keyframe must be at frame 0");
  }
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (keys[i].frame_index < 0 || keys[i].frame_index >= frames) {
      raise(ErrorCode::kKeyOutOfRange, "keyframe index " + std::to_string(keys[i].frame_index));
    }
    if (i > 0 && keys[i].frame_index <= keys[i - 1].frame_index) {
      raise(ErrorCode::kUnsortedKeys, "keyframe indices must be strictly increasing");
    }
    if (!keys[i].box.valid()) raise(ErrorCode::kInvalidArgument, "keyframe box invalid");
  }

  BoxSequence out(frames);
  std::size_t seg = 0;
  for (int t = 0; t < frames; ++t) {
    while (seg + 1 < keys.size() && keys[seg + 1].frame_index <= t) ++seg;
    const Keyframe& a = keys[seg];
    if (seg + 1 == keys.size() || t == a.frame_index) {
      out[t] = a.box;
      continue;
    }
    const Keyframe& b = keys[seg + 1];
    const double s = static_cast<double>(t - a.frame_index) / (b.frame_index - a.frame_index);
    auto lerp = [s](double p, double q) { return p + s * (q - p); };
    out[t] = {lerp(a.box.cx, b.box.cx), lerp(a.box.cy, b.box.cy), lerp(a.box.w, b.box.w),
              lerp(a.box.h, b.box.h)};
  }
  return out;
}

BoxSequence perturb_sequence(const BoxSequence& seq, double sigma_jitter, double sigma_drift,
                             std::uint64_t seed) {
  if (!(sigma_jitter >= 0.0) || !(sigma_drift >= 0.0)) {
    raise(ErrorCode::kInvalidArgument, "perturbation sigmas must be >= 0");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  BoxSequence out = seq;
  double drift[4] = {0.0, 0.0, 0.0, 0.0};
  for (Box2D& b : out) {
    double* fields[4] = {&b.cx, &b.cy, &b.w, &b.h};
    for (int c = 0; c < 4; ++c) {
      drift[c] += sigma_drift * normal(rng);
      *fields[c] += drift[c] + sigma_jitter * normal(rng);
    }
    b.w = std::max(b.w, 0.0);
    b.h = std::max(b.h, 0.0);
  }
  return out;
}

}  // namespace xview
