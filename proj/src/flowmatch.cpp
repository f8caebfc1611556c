#include "xview/flowmatch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "xview/errors.hpp"
#include "xview/metrics.hpp"
#include "xview/optim.hpp"

namespace xview {

void TrainConfig::validate() const {
  if (steps < 1) raise(ErrorCode::kInvalidArgument, "steps must be >= 1");
  if (!(lr > 0.0)) raise(ErrorCode::kInvalidArgument, "lr must be > 0");
  if (batch_size < 1) raise(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  for (double p : {drop_trajectories, drop_context, drop_reference}) {
    if (!(p >= 0.0 && p <= 1.0)) raise(ErrorCode::kInvalidArgument, "dropout outside [0, 1]");
  }
}

namespace {

void check_same(std::size_t a, std::size_t b) {
  if (a != b) {
    raise(ErrorCode::kShapeMismatch,
          "token counts differ: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

std::vector<double> draw_normal(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(n);
  for (double& v : out) v = normal(rng);
  return out;
}

}  // namespace

std::vector<double> interpolant(std::span<const double> x0, std::span<const double> x1, double t) {
  check_same(x0.size(), x1.size());
  if (!(t >= 0.0 && t <= 1.0)) raise(ErrorCode::kInvalidArgument, "t outside [0, 1]");
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - t) * x0[i] + t * x1[i];
  return out;
}

std::vector<double> target_velocity(std::span<const double> x0, std::span<const double> x1) {
  check_same(x0.size(), x1.size());
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x1[i] - x0[i];
  return out;
}

VelocityFn velocity_field(const Dit<float>& model) {
  return [&model](std::span<const double> x_t, double t, const Conditions& c) {
    const std::vector<float> xf(x_t.begin(), x_t.end());
    const std::vector<float> v = model.velocity(xf, t, c);
    return std::vector<double>(v.begin(), v.end());
  };
}

double flow_matching_loss(const VelocityFn& velocity, std::span<const FlowExample> batch,
                          std::mt19937_64& rng) {
  if (batch.empty()) raise(ErrorCode::kEmptyDataset, "empty batch");
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  double total = 0.0;
  for (const FlowExample& ex : batch) {
    const std::vector<double> x0 = draw_normal(ex.target.size(), rng);
    const double t = uniform(rng);
    const std::vector<double> xt = interpolant(x0, ex.target, t);
    const std::vector<double> v = velocity(xt, t, ex.cond);
    check_same(v.size(), ex.target.size());
    double se = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double r = (ex.target[i] - x0[i]) - v[i];
      se += r * r;
    }
    total += se / static_cast<double>(v.size());
  }
  return total / static_cast<double>(batch.size());
}

std::vector<double> boxes_to_tokens(const BoxSequence& boxes) {
  std::vector<double> out;
  out.reserve(boxes.size() * 4);
  for (const Box2D& b : boxes) {
    out.insert(out.end(), {b.cx, b.cy, b.w, b.h});
  }
  return out;
}

BoxSequence tokens_to_boxes(std::span<const double> tokens, bool clamp_output) {
  if (tokens.size() % 4 != 0) raise(ErrorCode::kShapeMismatch, "token count not a multiple of 4");
  BoxSequence out(tokens.size() / 4);
  for (std::size_t t = 0; t < out.size(); ++t) {
    out[t] = {tokens[4 * t], tokens[4 * t + 1], tokens[4 * t + 2], tokens[4 * t + 3]};
    if (clamp_output) {
      out[t].w = std::max(out[t].w, 0.0);
      out[t].h = std::max(out[t].h, 0.0);
    }
  }
  return out;
}

std::vector<double> initial_noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return draw_normal(n, rng);
}

std::vector<double> integrate(const VelocityFn& velocity, const Conditions& cond, std::size_t n,
                              const SampleConfig& cfg) {
  if (cfg.num_steps < 1) raise(ErrorCode::kInvalidArgument, "num_steps must be >= 1");
  std::vector<double> x = initial_noise(n, cfg.seed);
  const double dt = 1.0 / cfg.num_steps;
  for (int i = 0; i < cfg.num_steps; ++i) {
    const std::vector<double> v = velocity(x, static_cast<double>(i) / cfg.num_steps, cond);
    check_same(v.size(), n);
    for (std::size_t j = 0; j < n; ++j) x[j] += dt * v[j];
  }
  return x;
}

BoxSequence sample(const VelocityFn& velocity, const Conditions& cond, int frames,
                   const SampleConfig& cfg) {
  const std::vector<double> x = integrate(velocity, cond, static_cast<std::size_t>(frames) * 4, cfg);
  BoxSequence boxes = tokens_to_boxes(x, cfg.clamp_output);
  if (!cfg.clamp_output) {
    // Box2D requires non-negative extents; negative widths only appear on a
    // badly trained model and are reported as degenerate boxes.
    for (Box2D& b : boxes) {
      b.w = std::max(b.w, 0.0);
      b.h = std::max(b.h, 0.0);
    }
  }
  return boxes;
}

std::vector<double> encode_target(const DitConfig& cfg, const Conditions& cond,
                                  std::span<const double> box_tokens) {
  std::vector<double> out(box_tokens.begin(), box_tokens.end());
  if (cfg.residual_target) {
    check_same(cond.b_ref.size(), out.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= cond.b_ref[i];
  }
  return out;
}

std::vector<double> decode_sample(const DitConfig& cfg, const Conditions& cond,
                                  std::span<const double> data_tokens) {
  std::vector<double> out(data_tokens.begin(), data_tokens.end());
  if (cfg.residual_target) {
    check_same(cond.b_ref.size(), out.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += cond.b_ref[i];
  }
  return out;
}

BoxSequence sample(const Dit<float>& model, const Conditions& cond, const SampleConfig& cfg) {
  const std::size_t n = static_cast<std::size_t>(model.config().frames) * 4;
  const std::vector<double> x = integrate(velocity_field(model), cond, n, cfg);
  BoxSequence boxes = tokens_to_boxes(decode_sample(model.config(), cond, x), cfg.clamp_output);
  for (Box2D& b : boxes) {
    b.w = std::max(b.w, 0.0);
    b.h = std::max(b.h, 0.0);
  }
  return boxes;
}

namespace {

double eval_iou(const Dit<float>& model, std::span<const FlowExample> val, int count, int steps) {
  const std::size_t n = std::min<std::size_t>(val.size(), static_cast<std::size_t>(count));
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    SampleConfig sc;
    sc.num_steps = steps;
    sc.seed = 1000 + i;
    const BoxSequence pred = sample(model, val[i].cond, sc);
    acc += mean_iou(pred, tokens_to_boxes(val[i].target));
  }
  return n ? acc / static_cast<double>(n) : 0.0;
}

}  // namespace

TrainResult train(Dit<float> model, std::span<const FlowExample> data, const TrainConfig& cfg,
                  std::span<const FlowExample> validation, const TrainProgress& progress) {
  cfg.validate();
  if (data.empty()) raise(ErrorCode::kEmptyDataset, "training set is empty");
  const std::size_t tokens = static_cast<std::size_t>(model.config().frames) * 4;
  // Flow targets in the model's data space.
  std::vector<std::vector<double>> targets;
  targets.reserve(data.size());
  for (const FlowExample& ex : data) {
    check_same(ex.target.size(), tokens);
    targets.push_back(encode_target(model.config(), ex.cond, ex.target));
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  AdamWConfig opt_cfg;
  opt_cfg.lr = cfg.lr;
  opt_cfg.weight_decay = cfg.weight_decay;
  AdamW<float> opt(opt_cfg);
  auto& params = model.parameters();

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();

  std::span<const FlowExample> val = validation.empty() ? data : validation;
  TrainResult result{ModelCheckpoint{model, 0, cfg.seed}, {}};
  result.curve.reserve(cfg.steps);

  std::vector<float> xt(tokens);
  std::vector<float> neg_target(tokens);
  for (int step = 1; step <= cfg.steps; ++step) {
    for (auto& p : params) p.zero_grad();
    double step_loss = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const std::size_t pick = order[cursor++];
      const FlowExample& ex = data[pick];
      const std::vector<double>& x1 = targets[pick];
      const double t = uniform(rng);
      for (std::size_t i = 0; i < tokens; ++i) {
        const double x0 = normal(rng);
        xt[i] = static_cast<float>((1.0 - t) * x0 + t * x1[i]);
        neg_target[i] = static_cast<float>(x0 - x1[i]);
      }
      Conditions cond = ex.cond;
      cond.drop_trajectories = cond.drop_trajectories || uniform(rng) < cfg.drop_trajectories;
      cond.drop_context = cond.drop_context || uniform(rng) < cfg.drop_context;
      cond.drop_reference = cond.drop_reference || uniform(rng) < cfg.drop_reference;

      ad::Graph<float> g;
      const ad::Tensor<float> v = model.forward(g, xt, t, cond, true);
      const ad::Tensor<float> residual = ad::add(v, g.constant(v.shape(), neg_target));
      const ad::Tensor<float> loss = ad::scale(
          ad::sum_of_squares(residual), 1.0f / static_cast<float>(tokens * cfg.batch_size));
      g.backward(loss);
      step_loss += loss.item();
    }

    if (cfg.grad_clip > 0.0) {
      double sq = 0.0;
      for (const auto& p : params)
        for (float gv : p.grad) sq += static_cast<double>(gv) * gv;
      const double norm = std::sqrt(sq);
      if (norm > cfg.grad_clip) {
        const float f = static_cast<float>(cfg.grad_clip / norm);
        for (auto& p : params)
          for (float& gv : p.grad) gv *= f;
      }
    }
    if (cfg.warmup_steps > 0) {
      opt.set_lr(cfg.lr * std::min(1.0, static_cast<double>(step) / cfg.warmup_steps));
    }
    opt.step(params);

    LossPoint point{step, step_loss, std::nullopt};
    if ((cfg.eval_every > 0 && step % cfg.eval_every == 0) || step == cfg.steps) {
      if (cfg.eval_samples > 0) {
        point.eval_iou = eval_iou(model, val, cfg.eval_samples, cfg.eval_sample_steps);
      }
    }
    result.curve.push_back(point);
    if (progress) progress(point);
  }
  result.checkpoint = ModelCheckpoint{std::move(model), cfg.steps, cfg.seed};
  return result;
}

std::string loss_curve_csv(std::span<const LossPoint> curve) {
  std::ostringstream os;
  os.precision(9);
  os << "step,loss,eval_iou\n";
  for (const LossPoint& p : curve) {
    os << p.step << ',' << p.loss << ',';
    if (p.eval_iou) os << *p.eval_iou;
    os << '\n';
  }
  return os.str();
}

}  // namespace xview
