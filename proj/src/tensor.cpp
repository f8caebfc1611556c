#include "xview/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xview/errors.hpp"
#include "xview/kernels.hpp"

namespace xview::ad {

using kernels::Trans;

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// ---- Tensor ---------------------------------------------------------------

template <typename T>
const Shape& Tensor<T>::shape() const {
  return graph_->node(id_).shape;
}

template <typename T>
std::size_t Tensor<T>::size() const {
  return graph_->node(id_).value.size();
}

template <typename T>
std::size_t Tensor<T>::rows() const {
  const Shape& s = shape();
  return s.empty() ? 1 : s.front();
}

template <typename T>
std::size_t Tensor<T>::cols() const {
  const Shape& s = shape();
  return s.size() < 2 ? 1 : s.back();
}

template <typename T>
std::span<const T> Tensor<T>::data() const {
  return graph_->node(id_).value;
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  return graph_->grad_buffer(id_);
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) raise(ErrorCode::kShapeMismatch, "item() on " + shape_string(shape()));
  return data()[0];
}

template <typename T>
bool Tensor<T>::requires_grad() const {
  return graph_->node(id_).requires_grad;
}

// ---- Graph ----------------------------------------------------------------

template <typename T>
Tensor<T> Graph<T>::emit(Shape shape, std::vector<T> value, std::vector<std::size_t> inputs,
                         BackwardFn backward, std::vector<T> saved) {
  if (numel(shape) != value.size()) {
    raise(ErrorCode::kShapeMismatch, "node shape " + shape_string(shape) + " vs " +
                                         std::to_string(value.size()) + " values");
  }
  for (const T v : value) {
    if (!std::isfinite(v)) raise(ErrorCode::kNonFiniteValue, "non-finite value in forward pass");
  }
  Node n;
  n.shape = std::move(shape);
  n.value = std::move(value);
  n.saved = std::move(saved);
  for (std::size_t in : inputs) n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Tensor<T>(this, nodes_.size() - 1);
}

template <typename T>
Tensor<T> Graph<T>::constant(Shape shape, std::vector<T> value) {
  return emit(std::move(shape), std::move(value), {}, nullptr);
}

template <typename T>
Tensor<T> Graph<T>::variable(Shape shape, std::vector<T> value) {
  Tensor<T> t = emit(std::move(shape), std::move(value), {}, nullptr);
  nodes_.back().requires_grad = true;
  return t;
}

template <typename T>
Tensor<T> Graph<T>::parameter(Parameter<T>& p, bool requires_grad) {
  Tensor<T> t = emit(p.shape, p.value, {}, nullptr);
  nodes_.back().requires_grad = requires_grad;
  nodes_.back().parameter = requires_grad ? &p : nullptr;
  return t;
}

template <typename T>
std::vector<T>& Graph<T>::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), T(0));
  return n.grad;
}

template <typename T>
void Graph<T>::backward(const Tensor<T>& loss) {
  if (loss.graph() != this) raise(ErrorCode::kInvalidArgument, "loss belongs to another graph");
  if (loss.size() != 1) {
    raise(ErrorCode::kNotScalarLoss, "loss has shape " + shape_string(loss.shape()));
  }
  for (Node& n : nodes_) {
    if (n.requires_grad) n.grad.assign(n.value.size(), T(0));
  }
  if (!nodes_[loss.id()].requires_grad) return;
  nodes_[loss.id()].grad[0] = T(1);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.requires_grad && n.backward) n.backward(*this, id);
  }
  for (Node& n : nodes_) {
    if (n.parameter == nullptr) continue;
    std::vector<T>& g = n.parameter->grad;
    if (g.size() != n.grad.size()) g.assign(n.grad.size(), T(0));
    kernels::add<T>(g.size(), g.data(), n.grad.data(), g.data());
  }
}

namespace {

template <typename T>
void require_rank2(const Tensor<T>& x, const char* op) {
  if (x.shape().size() != 2) {
    raise(ErrorCode::kShapeMismatch, std::string(op) + " expects rank 2, got " +
                                         shape_string(x.shape()));
  }
}

template <typename T>
void require_same_graph(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.graph() != b.graph()) raise(ErrorCode::kInvalidArgument, "tensors from different graphs");
}

// Adds src into the gradient of node `id` when it participates in backward.
template <typename T>
void accumulate(Graph<T>& g, std::size_t id, const T* src) {
  if (!g.node(id).requires_grad) return;
  std::vector<T>& dst = g.grad_buffer(id);
  kernels::add<T>(dst.size(), dst.data(), src, dst.data());
}

}  // namespace

// ---- ops ------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_graph(a, b);
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    raise(ErrorCode::kShapeMismatch,
          "matmul " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  std::vector<T> out(m * n);
  kernels::gemm<T>(Trans::kNo, Trans::kNo, m, n, k, a.data().data(), b.data().data(), out.data(),
                   false);
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph()->emit({m, n}, std::move(out), {ia, ib}, [=](Graph<T>& g, std::size_t self) {
    const T* dc = g.node(self).grad.data();
    if (g.node(ia).requires_grad) {
      // dA += dC * B^T
      kernels::gemm<T>(Trans::kNo, Trans::kYes, m, k, n, dc, g.node(ib).value.data(),
                       g.grad_buffer(ia).data(), true);
    }
    if (g.node(ib).requires_grad) {
      // dB += A^T * dC
      kernels::gemm<T>(Trans::kYes, Trans::kNo, k, n, m, g.node(ia).value.data(), dc,
                       g.grad_buffer(ib).data(), true);
    }
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_graph(a, b);
  if (a.shape() != b.shape()) {
    raise(ErrorCode::kShapeMismatch,
          "add " + shape_string(a.shape()) + " + " + shape_string(b.shape()));
  }
  std::vector<T> out(a.size());
  kernels::add<T>(out.size(), a.data().data(), b.data().data(), out.data());
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph()->emit(a.shape(), std::move(out), {ia, ib}, [=](Graph<T>& g, std::size_t self) {
    const T* d = g.node(self).grad.data();
    accumulate(g, ia, d);
    accumulate(g, ib, d);
  });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  require_same_graph(x, bias);
  const std::size_t d = x.shape().empty() ? 1 : x.shape().back();
  if (bias.size() != d) {
    raise(ErrorCode::kShapeMismatch,
          "add_bias " + shape_string(x.shape()) + " + " + shape_string(bias.shape()));
  }
  const std::size_t rows = x.size() / d;
  std::vector<T> out(x.data().begin(), x.data().end());
  for (std::size_t r = 0; r < rows; ++r) {
    kernels::add<T>(d, out.data() + r * d, bias.data().data(), out.data() + r * d);
  }
  const std::size_t ix = x.id(), ib = bias.id();
  return x.graph()->emit(x.shape(), std::move(out), {ix, ib}, [=](Graph<T>& g, std::size_t self) {
    const T* dy = g.node(self).grad.data();
    accumulate(g, ix, dy);
    if (g.node(ib).requires_grad) {
      std::vector<T>& db = g.grad_buffer(ib);
      for (std::size_t r = 0; r < rows; ++r) kernels::add<T>(d, db.data(), dy + r * d, db.data());
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, std::type_identity_t<T> factor) {
  std::vector<T> out(x.data().begin(), x.data().end());
  kernels::scale<T>(out.size(), factor, out.data());
  const std::size_t ix = x.id();
  return x.graph()->emit(x.shape(), std::move(out), {ix}, [=](Graph<T>& g, std::size_t self) {
    if (!g.node(ix).requires_grad) return;
    const std::vector<T>& dy = g.node(self).grad;
    kernels::axpy<T>(dy.size(), factor, dy.data(), g.grad_buffer(ix).data());
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_graph(a, b);
  if (a.shape() != b.shape()) {
    raise(ErrorCode::kShapeMismatch,
          "mul " + shape_string(a.shape()) + " * " + shape_string(b.shape()));
  }
  std::vector<T> out(a.size());
  kernels::mul<T>(out.size(), a.data().data(), b.data().data(), out.data());
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph()->emit(a.shape(), std::move(out), {ia, ib}, [=](Graph<T>& g, std::size_t self) {
    const std::vector<T>& dy = g.node(self).grad;
    std::vector<T> tmp(dy.size());
    if (g.node(ia).requires_grad) {
      kernels::mul<T>(dy.size(), dy.data(), g.node(ib).value.data(), tmp.data());
      accumulate(g, ia, tmp.data());
    }
    if (g.node(ib).requires_grad) {
      kernels::mul<T>(dy.size(), dy.data(), g.node(ia).value.data(), tmp.data());
      accumulate(g, ib, tmp.data());
    }
  });
}

namespace {

// Normalizes rows of x; returns xhat and writes the per-row reciprocal std.
template <typename T>
std::vector<T> normalize_rows(std::span<const T> x, std::size_t d, T eps, std::vector<T>& rstd) {
  const std::size_t rows = x.size() / d;
  std::vector<T> xhat(x.size());
  rstd.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = x.data() + r * d;
    T mu = T(0);
    for (std::size_t i = 0; i < d; ++i) mu += row[i];
    mu /= T(d);
    T var = T(0);
    for (std::size_t i = 0; i < d; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= T(d);
    const T rs = T(1) / std::sqrt(var + eps);
    rstd[r] = rs;
    for (std::size_t i = 0; i < d; ++i) xhat[r * d + i] = (row[i] - mu) * rs;
  }
  return xhat;
}

// dx = rstd * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat)), row-wise.
template <typename T>
void layer_norm_input_grad(const T* dxhat, const T* xhat, const T* rstd, std::size_t rows,
                           std::size_t d, T* dx) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* gh = dxhat + r * d;
    const T* xh = xhat + r * d;
    T mean_g = T(0), mean_gx = T(0);
    for (std::size_t i = 0; i < d; ++i) {
      mean_g += gh[i];
      mean_gx += gh[i] * xh[i];
    }
    mean_g /= T(d);
    mean_gx /= T(d);
    for (std::size_t i = 0; i < d; ++i) {
      dx[r * d + i] += rstd[r] * (gh[i] - mean_g - xh[i] * mean_gx);
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, T eps) {
  const std::size_t d = x.shape().empty() ? 1 : x.shape().back();
  std::vector<T> rstd;
  std::vector<T> xhat = normalize_rows<T>(x.data(), d, eps, rstd);
  const std::size_t ix = x.id();
  const std::size_t rows = x.size() / d;
  std::vector<T> out = xhat;
  return x.graph()->emit(
      x.shape(), std::move(out), {ix},
      [=](Graph<T>& g, std::size_t self) {
        if (!g.node(ix).requires_grad) return;
        const auto& n = g.node(self);
        layer_norm_input_grad(n.grad.data(), n.value.data(), n.saved.data(), rows, d,
                              g.grad_buffer(ix).data());
      },
      std::move(rstd));
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  require_same_graph(x, gain);
  require_same_graph(x, bias);
  const std::size_t d = x.shape().empty() ? 1 : x.shape().back();
  if (gain.size() != d || bias.size() != d) {
    raise(ErrorCode::kShapeMismatch, "layer_norm gain/bias must match the last axis");
  }
  std::vector<T> rstd;
  std::vector<T> xhat = normalize_rows<T>(x.data(), d, eps, rstd);
  const std::size_t rows = x.size() / d;
  std::vector<T> out(x.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < d; ++i)
      out[r * d + i] = xhat[r * d + i] * gain.data()[i] + bias.data()[i];
  // Saved layout: [rstd (rows) | xhat (rows*d)].
  std::vector<T> saved = std::move(rstd);
  saved.insert(saved.end(), xhat.begin(), xhat.end());
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.graph()->emit(
      x.shape(), std::move(out), {ix, ig, ib},
      [=](Graph<T>& g, std::size_t self) {
        const auto& n = g.node(self);
        const T* dy = n.grad.data();
        const T* rs = n.saved.data();
        const T* xh = n.saved.data() + rows;
        if (g.node(ig).requires_grad || g.node(ib).requires_grad) {
          std::vector<T>& dg = g.grad_buffer(ig);
          std::vector<T>& db = g.grad_buffer(ib);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t i = 0; i < d; ++i) {
              dg[i] += dy[r * d + i] * xh[r * d + i];
              db[i] += dy[r * d + i];
            }
        }
        if (g.node(ix).requires_grad) {
          std::vector<T> dxhat(rows * d);
          const T* gv = g.node(ig).value.data();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t i = 0; i < d; ++i) dxhat[r * d + i] = dy[r * d + i] * gv[i];
          layer_norm_input_grad(dxhat.data(), xh, rs, rows, d, g.grad_buffer(ix).data());
        }
      },
      std::move(saved));
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  const std::size_t d = x.shape().empty() ? 1 : x.shape().back();
  const std::size_t rows = x.size() / d;
  std::vector<T> out(x.size());
  const T* in = x.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = in + r * d;
    T mx = *std::max_element(row, row + d);
    T sum = T(0);
    for (std::size_t i = 0; i < d; ++i) {
      out[r * d + i] = std::exp(row[i] - mx);
      sum += out[r * d + i];
    }
    const T inv = T(1) / sum;
    for (std::size_t i = 0; i < d; ++i) out[r * d + i] *= inv;
  }
  const std::size_t ix = x.id();
  return x.graph()->emit(x.shape(), std::move(out), {ix}, [=](Graph<T>& g, std::size_t self) {
    if (!g.node(ix).requires_grad) return;
    const auto& n = g.node(self);
    std::vector<T>& dx = g.grad_buffer(ix);
    for (std::size_t r = 0; r < rows; ++r) {
      const T* y = n.value.data() + r * d;
      const T* dy = n.grad.data() + r * d;
      const T s = kernels::dot<T>(d, y, dy);
      for (std::size_t i = 0; i < d; ++i) dx[r * d + i] += y[i] * (dy[i] - s);
    }
  });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T kC = T(0.7978845608028654);  // sqrt(2 / pi)
  constexpr T kA = T(0.044715);
  std::vector<T> out(x.size());
  const T* in = x.data().data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = in[i];
    out[i] = T(0.5) * v * (T(1) + std::tanh(kC * (v + kA * v * v * v)));
  }
  const std::size_t ix = x.id();
  return x.graph()->emit(x.shape(), std::move(out), {ix}, [=](Graph<T>& g, std::size_t self) {
    if (!g.node(ix).requires_grad) return;
    const auto& n = g.node(self);
    const std::vector<T>& xv = g.node(ix).value;
    std::vector<T>& dx = g.grad_buffer(ix);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const T v = xv[i];
      const T th = std::tanh(kC * (v + kA * v * v * v));
      const T deriv =
          T(0.5) * (T(1) + th) + T(0.5) * v * (T(1) - th * th) * kC * (T(1) + T(3) * kA * v * v);
      dx[i] += n.grad[i] * deriv;
    }
  });
}

namespace {

struct AxisView {
  std::size_t outer, len, inner;
};

AxisView axis_view(const Shape& s, std::size_t axis) {
  AxisView v{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

}  // namespace

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& s = x.shape();
  if (axis >= s.size() || begin > end || end > s[axis]) {
    raise(ErrorCode::kShapeMismatch, "slice [" + std::to_string(begin) + ", " +
                                         std::to_string(end) + ") on axis " +
                                         std::to_string(axis) + " of " + shape_string(s));
  }
  const AxisView v = axis_view(s, axis);
  const std::size_t len = end - begin;
  Shape out_shape = s;
  out_shape[axis] = len;
  std::vector<T> out(v.outer * len * v.inner);
  const T* in = x.data().data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    std::copy_n(in + (o * v.len + begin) * v.inner, len * v.inner, out.data() + o * len * v.inner);
  }
  const std::size_t ix = x.id();
  return x.graph()->emit(std::move(out_shape), std::move(out), {ix},
                         [=](Graph<T>& g, std::size_t self) {
                           if (!g.node(ix).requires_grad) return;
                           const T* dy = g.node(self).grad.data();
                           T* dx = g.grad_buffer(ix).data();
                           for (std::size_t o = 0; o < v.outer; ++o) {
                             kernels::add<T>(len * v.inner, dx + (o * v.len + begin) * v.inner,
                                             dy + o * len * v.inner,
                                             dx + (o * v.len + begin) * v.inner);
                           }
                         });
}

template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> parts, std::size_t axis) {
  if (parts.empty()) raise(ErrorCode::kShapeMismatch, "concat of nothing");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) raise(ErrorCode::kShapeMismatch, "concat axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> lens;
  for (const Tensor<T>& p : parts) {
    require_same_graph(parts.front(), p);
    Shape s = p.shape();
    if (s.size() != first.size()) raise(ErrorCode::kShapeMismatch, "concat rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) {
        raise(ErrorCode::kShapeMismatch,
              "concat " + shape_string(first) + " with " + shape_string(s));
      }
    }
    out_shape[axis] += s[axis];
    ids.push_back(p.id());
    lens.push_back(s[axis]);
  }
  const AxisView v = axis_view(out_shape, axis);
  std::vector<T> out(numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const T* in = parts[pi].data().data();
    for (std::size_t o = 0; o < v.outer; ++o) {
      std::copy_n(in + o * lens[pi] * v.inner, lens[pi] * v.inner,
                  out.data() + (o * v.len + offset) * v.inner);
    }
    offset += lens[pi];
  }
  return parts.front().graph()->emit(
      out_shape, std::move(out), ids, [=](Graph<T>& g, std::size_t self) {
        const T* dy = g.node(self).grad.data();
        std::size_t off = 0;
        for (std::size_t pi = 0; pi < ids.size(); ++pi) {
          if (g.node(ids[pi]).requires_grad) {
            T* dx = g.grad_buffer(ids[pi]).data();
            for (std::size_t o = 0; o < v.outer; ++o) {
              kernels::add<T>(lens[pi] * v.inner, dx + o * lens[pi] * v.inner,
                              dy + (o * v.len + off) * v.inner, dx + o * lens[pi] * v.inner);
            }
          }
          off += lens[pi];
        }
      });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.size()) {
    raise(ErrorCode::kShapeMismatch,
          "reshape " + shape_string(x.shape()) + " to " + shape_string(shape));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  const std::size_t ix = x.id();
  return x.graph()->emit(std::move(shape), std::move(out), {ix},
                         [=](Graph<T>& g, std::size_t self) {
                           accumulate(g, ix, g.node(self).grad.data());
                         });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  require_rank2(x, "transpose");
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<T> out(r * c);
  const T* in = x.data().data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = in[i * c + j];
  const std::size_t ix = x.id();
  return x.graph()->emit({c, r}, std::move(out), {ix}, [=](Graph<T>& g, std::size_t self) {
    if (!g.node(ix).requires_grad) return;
    const T* dy = g.node(self).grad.data();
    T* dx = g.grad_buffer(ix).data();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) dx[i * c + j] += dy[j * r + i];
  });
}

template <typename T>
Tensor<T> embedding(const Tensor<T>& table, std::span<const std::size_t> indices) {
  require_rank2(table, "embedding");
  const std::size_t vocab = table.rows(), d = table.cols();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  std::vector<T> out(idx.size() * d);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= vocab) {
      raise(ErrorCode::kShapeMismatch, "embedding index " + std::to_string(idx[i]) +
                                           " out of range " + std::to_string(vocab));
    }
    std::copy_n(table.data().data() + idx[i] * d, d, out.data() + i * d);
  }
  const std::size_t it = table.id();
  return table.graph()->emit({idx.size(), d}, std::move(out), {it},
                             [=](Graph<T>& g, std::size_t self) {
                               if (!g.node(it).requires_grad) return;
                               const T* dy = g.node(self).grad.data();
                               T* dt = g.grad_buffer(it).data();
                               for (std::size_t i = 0; i < idx.size(); ++i) {
                                 kernels::add<T>(d, dt + idx[i] * d, dy + i * d, dt + idx[i] * d);
                               }
                             });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  const std::size_t n = x.size();
  T sum = T(0);
  for (const T v : x.data()) sum += v;
  const std::size_t ix = x.id();
  return x.graph()->emit({1}, {sum / T(n)}, {ix}, [=](Graph<T>& g, std::size_t self) {
    if (!g.node(ix).requires_grad) return;
    const T d = g.node(self).grad[0] / T(n);
    for (T& v : g.grad_buffer(ix)) v += d;
  });
}

template <typename T>
Tensor<T> sum_of_squares(const Tensor<T>& x) {
  T sum = T(0);
  for (const T v : x.data()) sum += v * v;
  const std::size_t ix = x.id();
  return x.graph()->emit({1}, {sum}, {ix}, [=](Graph<T>& g, std::size_t self) {
    if (!g.node(ix).requires_grad) return;
    const T d = T(2) * g.node(self).grad[0];
    kernels::axpy<T>(g.node(ix).value.size(), d, g.node(ix).value.data(),
                     g.grad_buffer(ix).data());
  });
}

#define XVIEW_INSTANTIATE(T)                                                               \
  template class Tensor<T>;                                                                \
  template class Graph<T>;                                                                 \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> scale(const Tensor<T>&, std::type_identity_t<T>);                                         \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> layer_norm(const Tensor<T>&, T);                                      \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);  \
  template Tensor<T> softmax(const Tensor<T>&);                                            \
  template Tensor<T> gelu(const Tensor<T>&);                                               \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);       \
  template Tensor<T> concat(std::span<const Tensor<T>>, std::size_t);                      \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                     \
  template Tensor<T> transpose(const Tensor<T>&);                                          \
  template Tensor<T> embedding(const Tensor<T>&, std::span<const std::size_t>);            \
  template Tensor<T> mean(const Tensor<T>&);                                               \
  template Tensor<T> sum_of_squares(const Tensor<T>&);

XVIEW_INSTANTIATE(float)
XVIEW_INSTANTIATE(double)

#undef XVIEW_INSTANTIATE

}  // namespace xview::ad
