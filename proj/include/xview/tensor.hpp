#pragma once
// Dense tensors with tape-based reverse-mode differentiation.
//
// A Graph owns every node produced while evaluating an expression; Tensor is a
// cheap handle into it. Nodes are appended in evaluation order, so the tape is
// already topologically sorted and backward() is a single reverse sweep.
// Broadcasting is limited to add_bias (trailing-axis bias addition).

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace xview::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

template <typename T>
struct Parameter {
  std::string name;
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;

  void zero_grad() { grad.assign(value.size(), T(0)); }
};

template <typename T>
class Graph;

template <typename T>
class Tensor {
 public:
  Tensor() = default;

  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rows() const;
  std::size_t cols() const;
  std::span<const T> data() const;
  // Zero-filled when the node received no gradient.
  std::span<const T> grad() const;
  T item() const;
  bool requires_grad() const;
  std::size_t id() const { return id_; }
  Graph<T>* graph() const { return graph_; }

 private:
  friend class Graph<T>;
  Tensor(Graph<T>* g, std::size_t id) : graph_(g), id_(id) {}

  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    Parameter<T>* parameter = nullptr;
    std::vector<T> saved;  // op-specific forward state
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Tensor<T> constant(Shape shape, std::vector<T> value);
  Tensor<T> variable(Shape shape, std::vector<T> value);
  // Leaf bound to a parameter; backward() adds its gradient into p.grad.
  Tensor<T> parameter(Parameter<T>& p, bool requires_grad = true);

  void backward(const Tensor<T>& loss);

  std::size_t size() const { return nodes_.size(); }
  Node& node(std::size_t id) { return nodes_[id]; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  std::vector<T>& grad_buffer(std::size_t id);

  // Appends a node; runs the finiteness check on `value`.
  Tensor<T> emit(Shape shape, std::vector<T> value, std::vector<std::size_t> inputs,
                 BackwardFn backward, std::vector<T> saved = {});

 private:
  std::deque<Node> nodes_;
};

template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);
template <typename T> Tensor<T> scale(const Tensor<T>& x, std::type_identity_t<T> factor);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> layer_norm(const Tensor<T>& x, T eps = T(1e-5));
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-5));
template <typename T> Tensor<T> softmax(const Tensor<T>& x);
template <typename T> Tensor<T> gelu(const Tensor<T>& x);
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end);
template <typename T> Tensor<T> concat(std::span<const Tensor<T>> parts, std::size_t axis);
template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> transpose(const Tensor<T>& x);
template <typename T>
Tensor<T> embedding(const Tensor<T>& table, std::span<const std::size_t> indices);
template <typename T> Tensor<T> mean(const Tensor<T>& x);
template <typename T> Tensor<T> sum_of_squares(const Tensor<T>& x);

template <typename T>
Tensor<T> concat(std::initializer_list<Tensor<T>> parts, std::size_t axis) {
  std::vector<Tensor<T>> v(parts);
  return concat<T>(std::span<const Tensor<T>>(v), axis);
}

}  // namespace xview::ad
