#include "xview/optim.hpp"

#include <cmath>

#include "xview/errors.hpp"

namespace xview {

template <typename T>
void adamw_step(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v,
                std::int64_t step, const AdamWConfig& cfg) {
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
    raise(ErrorCode::kShapeMismatch, "adamw: parameter, gradient and moment sizes differ");
  }
  if (step < 1) raise(ErrorCode::kInvalidArgument, "adamw step counter is 1-based");
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  const double decay = 1.0 - cfg.lr * cfg.weight_decay;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double m_hat = mi / bc1;
    const double v_hat = vi / bc2;
    param[i] = static_cast<T>(param[i] * decay - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps));
  }
}

template <typename T>
void AdamW<T>::step(std::span<ad::Parameter<T>> params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value.size(), T(0));
      v_.emplace_back(p.value.size(), T(0));
    }
  }
  if (m_.size() != params.size()) raise(ErrorCode::kShapeMismatch, "adamw parameter set changed");
  ++step_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (p.grad.size() != p.value.size()) p.zero_grad();
    adamw_step<T>(p.value, p.grad, m_[i], v_[i], step_, cfg_);
  }
}

template void adamw_step<float>(std::span<float>, std::span<const float>, std::span<float>,
                                std::span<float>, std::int64_t, const AdamWConfig&);
template void adamw_step<double>(std::span<double>, std::span<const double>, std::span<double>,
                                 std::span<double>, std::int64_t, const AdamWConfig&);
template class AdamW<float>;
template class AdamW<double>;

}  // namespace xview
