#pragma once
// Central finite-difference gradient checks. The analytic gradient comes from
// the T-precision tape; the numerical oracle always runs the same expression
// at 64-bit so it is not limited by float rounding.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "xview/dit.hpp"
#include "xview/tensor.hpp"

namespace xview::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Entries whose analytic and numerical gradients are both below `floor` are
// compared on an absolute scale of `floor`.
inline double relative_error(double a, double b, double floor = 1e-3) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Fourth-order central stencil; truncation error O(h^4).
template <typename F>
double central_difference(F&& f, double x) {
  const double h = 1e-3 * std::max(1.0, std::abs(x));
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

// `f` is a generic callable: ad::Tensor<U> f(ad::Graph<U>&, const std::vector<ad::Tensor<U>>&)
// returning a scalar, instantiable for U = T and U = double.
template <typename T, typename F>
GradCheck check_gradients(F&& f, const std::vector<ad::Shape>& shapes, std::uint64_t seed,
                          double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<std::vector<double>> vals;
  for (const ad::Shape& s : shapes) {
    std::vector<double> v(ad::numel(s));
    for (double& x : v) x = static_cast<double>(static_cast<T>(u(rng)));
    vals.push_back(std::move(v));
  }

  ad::Graph<T> g;
  std::vector<ad::Tensor<T>> leaves;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    leaves.push_back(g.variable(shapes[i], std::vector<T>(vals[i].begin(), vals[i].end())));
  }
  g.backward(f(g, leaves));

  auto eval = [&](const std::vector<std::vector<double>>& v) {
    ad::Graph<double> gd;
    std::vector<ad::Tensor<double>> ls;
    for (std::size_t i = 0; i < shapes.size(); ++i) ls.push_back(gd.variable(shapes[i], v[i]));
    return f(gd, ls).item();
  };

  GradCheck out;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const auto grad = leaves[i].grad();
    for (std::size_t j = 0; j < vals[i].size(); ++j) {
      const double x = vals[i][j];
      const double fd = central_difference(
          [&](double xi) {
            vals[i][j] = xi;
            const double y = eval(vals);
            vals[i][j] = x;
            return y;
          },
          x);
      out.max_rel_error = std::max(out.max_rel_error, relative_error(grad[j], fd));
      ++out.checked;
    }
  }
  return out;
}

// Tiny model for whole-network checks.
inline constexpr double kGradcheckSigma = 0.1;
inline DitConfig tiny_dit_config(std::uint64_t seed = 0) {
  DitConfig c;
  c.layers = 2;
  c.model_dim = 16;
  c.heads = 2;
  c.frames = 4;
  c.grid = 2;
  c.dct_order = 3;
  c.context_res = 4;
  c.context_patch = 2;
  c.mlp_ratio = 2;
  c.init_seed = seed;
  return c;
}

inline Conditions random_conditions(const DitConfig& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Conditions out;
  out.b_ref.resize(static_cast<std::size_t>(c.frames) * 4);
  out.dct_tokens.resize(static_cast<std::size_t>(c.trajectory_tokens()) * 2 * c.dct_order);
  out.context.resize(static_cast<std::size_t>(c.context_res) * c.context_res);
  for (double& v : out.b_ref) v = u(rng);
  for (double& v : out.dct_tokens) v = 2.0 * u(rng) - 1.0;
  for (double& v : out.context) v = 0.05 + 0.3 * u(rng);
  return out;
}

// Adds N(0, sigma) draws to every parameter so that zero-initialized
// modulation and head weights carry gradient signal.
template <typename T>
void randomize(Dit<T>& model, std::uint64_t seed, double sigma = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  for (auto& p : model.parameters())
    for (T& v : p.value) v = static_cast<T>(v + n(rng));
}

// Flow-matching loss (mean over token components, as in training) of `model`
// at a fixed (x_t, t, target), checked against central differences of the
// 64-bit copy. Every parameter entry is visited.
template <typename T>
GradCheck check_dit_gradients(std::uint64_t seed) {
  const DitConfig cfg = tiny_dit_config(seed);
  Dit<double> ref(cfg);
  randomize(ref, seed, kGradcheckSigma);
  Dit<T> model = ref.template cast<T>();
  for (auto& p : ref.parameters())
    for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = static_cast<double>(static_cast<T>(p.value[i]));

  const Conditions cond = random_conditions(cfg, seed + 1);
  std::mt19937_64 rng(seed + 2);
  std::normal_distribution<double> n(0.0, 1.0);
  const std::size_t tokens = static_cast<std::size_t>(cfg.frames) * 4;
  std::vector<double> xt(tokens), target(tokens);
  for (double& v : xt) v = static_cast<double>(static_cast<T>(n(rng)));
  for (double& v : target) v = static_cast<double>(static_cast<T>(n(rng)));
  const double t = 0.37;

  for (auto& p : model.parameters()) p.zero_grad();
  {
    ad::Graph<T> g;
    const std::vector<T> x(xt.begin(), xt.end());
    std::vector<T> neg(tokens);
    for (std::size_t i = 0; i < tokens; ++i) neg[i] = static_cast<T>(-target[i]);
    const auto v = model.forward(g, x, t, cond, true);
    g.backward(ad::scale(ad::sum_of_squares(ad::add(v, g.constant(v.shape(), neg))),
                         static_cast<T>(1.0 / static_cast<double>(tokens))));
  }

  auto loss = [&]() {
    const auto v = ref.velocity(xt, t, cond);
    double acc = 0.0;
    for (std::size_t i = 0; i < tokens; ++i) acc += (v[i] - target[i]) * (v[i] - target[i]);
    return acc / static_cast<double>(tokens);
  };

  GradCheck out;
  auto& rp = ref.parameters();
  const auto& mp = model.parameters();
  for (std::size_t k = 0; k < rp.size(); ++k) {
    for (std::size_t j = 0; j < rp[k].value.size(); ++j) {
      const double x = rp[k].value[j];
      const double fd = central_difference(
          [&](double xi) {
            rp[k].value[j] = xi;
            const double y = loss();
            rp[k].value[j] = x;
            return y;
          },
          x);
      out.max_rel_error = std::max(out.max_rel_error, relative_error(mp[k].grad[j], fd));
      ++out.checked;
    }
  }
  return out;
}

}  // namespace xview::testing
