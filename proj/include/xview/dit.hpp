#pragma once
// Diffusion transformer predicting the flow-matching velocity of a T x 4 box
// token sequence, conditioned on source-view boxes, DCT point-track tokens and
// a coarse first-frame inverse-depth grid.
//
// Token layout (rows of the hidden state):
//   [0, T)                frame tokens: embed(x_t) + embed(b_ref), frame aligned
//   [T, T + G^2)          one token per point track (2K DCT features)
//   [T + G^2, N)          context patches (p x p cells of the context grid)
// Every slot has a learned positional embedding. The diffusion time drives
// adaptive layer-norm shift/scale/gate in every block; all modulation layers
// and the output head start at zero, so a fresh model predicts zero velocity.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xview/tensor.hpp"

namespace xview {

enum class Direction { kFirstToVideo, kVideoToFirst };

std::string_view to_string(Direction d);
Direction parse_direction(std::string_view name);  // "f2v" | "v2f"

enum class Stream { kTrajectories, kContext, kReference };

std::string_view to_string(Stream s);
Stream parse_stream(std::string_view name);  // throws UnknownStream

struct DitConfig {
  int layers = 8;
  int model_dim = 128;
  int heads = 4;
  int frames = 24;
  int grid = 12;
  int dct_order = 20;
  int context_res = 16;
  int context_patch = 4;
  int mlp_ratio = 4;
  Direction direction = Direction::kFirstToVideo;
  std::uint64_t init_seed = 0;
  // When set, the flow runs on target boxes minus the source boxes.
  bool residual_target = false;

  int trajectory_tokens() const { return grid * grid; }
  int context_tokens() const {
    const int per_side = context_res / context_patch;
    return per_side * per_side;
  }
  int token_count() const { return frames + trajectory_tokens() + context_tokens(); }
  void validate() const;

  bool operator==(const DitConfig&) const = default;
};

// Model inputs other than the noised tokens. All arrays row-major.
struct Conditions {
  std::vector<double> b_ref;       // T x 4 boxes in the source view
  std::vector<double> dct_tokens;  // G^2 x 2K
  std::vector<double> context;     // R x R inverse depth
  bool drop_trajectories = false;
  bool drop_context = false;
  bool drop_reference = false;

  bool dropped(Stream s) const;
};

// Marks a conditioning stream so the model substitutes its learned null token.
Conditions drop_condition(Stream stream, Conditions inputs);
Conditions drop_condition(std::string_view stream, Conditions inputs);

template <typename T>
class Dit {
 public:
  explicit Dit(const DitConfig& cfg);

  const DitConfig& config() const { return cfg_; }
  std::vector<ad::Parameter<T>>& parameters() { return params_; }
  const std::vector<ad::Parameter<T>>& parameters() const { return params_; }
  ad::Parameter<T>& parameter(std::string_view name);
  const ad::Parameter<T>& parameter(std::string_view name) const;
  std::size_t parameter_count() const;

  // Builds the velocity prediction (T x 4) on `g`. With requires_grad the
  // parameters enter as gradient-carrying leaves bound to this model.
  ad::Tensor<T> forward(ad::Graph<T>& g, std::span<const T> x_t, double t, const Conditions& c,
                        bool requires_grad);
  // Inference-only forward; safe to call concurrently on a shared model.
  std::vector<T> velocity(std::span<const T> x_t, double t, const Conditions& c) const;
  // N x D token embeddings before positional embeddings are added.
  std::vector<T> token_embeddings(std::span<const T> x_t, const Conditions& c) const;

  template <typename U>
  Dit<U> cast() const {
    Dit<U> out(cfg_);
    auto& dst = out.parameters();
    for (std::size_t i = 0; i < params_.size(); ++i) {
      dst[i].value.assign(params_[i].value.begin(), params_[i].value.end());
    }
    return out;
  }

 private:
  struct Bound;
  ad::Tensor<T> run(ad::Graph<T>& g, const Bound& p, std::span<const T> x_t, double t,
                    const Conditions& c, bool embeddings_only) const;
  Bound bind(ad::Graph<T>& g, bool requires_grad);
  Bound bind_const(ad::Graph<T>& g) const;
  void check_inputs(std::span<const T> x_t, const Conditions& c) const;

  DitConfig cfg_;
  std::vector<ad::Parameter<T>> params_;
};

// Sinusoidal embedding of a diffusion time in [0, 1] (scaled by 1000).
std::vector<double> timestep_embedding(double t, int dim);

}  // namespace xview
