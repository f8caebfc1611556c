#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "xview/tensor.hpp"

namespace xview {

struct AdamWConfig {
  double lr = 1.2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// One AdamW update of a single tensor. `step` is 1-based. Weight decay is
// decoupled: it shrinks the parameter directly and never enters the moments.
template <typename T>
void adamw_step(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v,
                std::int64_t step, const AdamWConfig& cfg);

template <typename T>
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  // Applies one update to every parameter using its accumulated .grad.
  void step(std::span<ad::Parameter<T>> params);

  std::int64_t steps_taken() const { return step_; }
  const AdamWConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  AdamWConfig cfg_;
  std::int64_t step_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
};

}  // namespace xview
