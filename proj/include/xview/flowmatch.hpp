#pragma once
// Flow-matching objective on the linear noise-to-data path and the Euler
// sampler that integrates the learned velocity field.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "xview/checkpoint.hpp"
#include "xview/dit.hpp"
#include "xview/geometry.hpp"

namespace xview {

struct TrainConfig {
  int steps = 4000;
  double lr = 1.2e-4;
  double weight_decay = 0.01;
  int batch_size = 16;
  std::uint64_t seed = 0;
  int eval_every = 500;
  int eval_samples = 16;
  int eval_sample_steps = 28;
  // Per-example probabilities of replacing a stream with its null token.
  double drop_trajectories = 0.1;
  double drop_context = 0.1;
  double drop_reference = 0.0;
  int warmup_steps = 0;
  double grad_clip = 1.0;  // global L2 norm; <= 0 disables

  void validate() const;
};

struct SampleConfig {
  int num_steps = 28;
  std::uint64_t seed = 0;
  bool clamp_output = false;
};

struct FlowExample {
  std::string id;
  Conditions cond;
  std::vector<double> target;  // T x 4 data tokens
};

std::vector<double> interpolant(std::span<const double> x0, std::span<const double> x1, double t);
std::vector<double> target_velocity(std::span<const double> x0, std::span<const double> x1);

using VelocityFn =
    std::function<std::vector<double>(std::span<const double> x_t, double t, const Conditions&)>;

VelocityFn velocity_field(const Dit<float>& model);

// Mean over the batch and token components of ||(x1 - x0) - v(x_t, t)||^2 with
// x0 ~ N(0, I) and t ~ U(0, 1) drawn from `rng` per example.
double flow_matching_loss(const VelocityFn& velocity, std::span<const FlowExample> batch,
                          std::mt19937_64& rng);

std::vector<double> boxes_to_tokens(const BoxSequence& boxes);
BoxSequence tokens_to_boxes(std::span<const double> tokens, bool clamp_output = false);

// Standard-normal starting point the sampler uses for a given seed.
std::vector<double> initial_noise(std::size_t n, std::uint64_t seed);

std::vector<double> integrate(const VelocityFn& velocity, const Conditions& cond, std::size_t n,
                              const SampleConfig& cfg);
BoxSequence sample(const VelocityFn& velocity, const Conditions& cond, int frames,
                   const SampleConfig& cfg);

// Data tokens the flow is trained on for a model: the target boxes, or their
// offset from cond.b_ref under residual_target.
std::vector<double> encode_target(const DitConfig& cfg, const Conditions& cond,
                                  std::span<const double> box_tokens);
std::vector<double> decode_sample(const DitConfig& cfg, const Conditions& cond,
                                  std::span<const double> data_tokens);
// Integrates the model's field and decodes boxes.
BoxSequence sample(const Dit<float>& model, const Conditions& cond, const SampleConfig& cfg);

struct LossPoint {
  int step = 0;
  double loss = 0.0;
  std::optional<double> eval_iou;
};

struct TrainResult {
  ModelCheckpoint checkpoint;
  std::vector<LossPoint> curve;
};

using TrainProgress = std::function<void(const LossPoint&)>;

TrainResult train(Dit<float> model, std::span<const FlowExample> data, const TrainConfig& cfg,
                  std::span<const FlowExample> validation = {}, const TrainProgress& progress = {});

// CSV with header "step,loss,eval_iou"; eval_iou is empty on rows without an
// evaluation.
std::string loss_curve_csv(std::span<const LossPoint> curve);

}  // namespace xview
