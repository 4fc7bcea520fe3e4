#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cin/common.hpp"
#include "cin/rng.hpp"

namespace cin {

template <typename T>
struct Node {
  Shape shape;
  ArrayX<T> value;
  ArrayX<T> grad;  // sized lazily during backward
  bool requires_grad = false;
  bool leaf = true;
  bool consumed = false;  // true once a backward pass released this node's tape entry
  std::string name;

  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void acc_grad(const ArrayX<T>& g) {
    if (grad.size() == 0) grad = ArrayX<T>::Zero(value.size());
    grad += g;
  }
  template <typename Expr>
  void acc_grad_expr(const Expr& g) {
    if (grad.size() == 0) grad = ArrayX<T>::Zero(value.size());
    grad += g;
  }
};

// Dense n-d tensor handle. Copying a Tensor copies the handle, not the data;
// values are immutable once produced by an op. Leaf tensors (parameters,
// inputs) own their storage and may be mutated between forward passes.
template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return from_array(std::move(shape), ArrayX<T>(), requires_grad, true);
  }

  static Tensor full(Shape shape, T v, bool requires_grad = false) {
    ArrayX<T> a = ArrayX<T>::Constant(numel(shape), v);
    return from_array(std::move(shape), std::move(a), requires_grad, false);
  }

  static Tensor ones(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), T(1), requires_grad);
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return full({1}, v, requires_grad);
  }

  static Tensor from_vector(Shape shape, const std::vector<T>& v,
                            bool requires_grad = false) {
    require_shape(numel(shape) == static_cast<Index>(v.size()),
                  "from_vector: shape " + shape_str(shape) + " expects " +
                      std::to_string(numel(shape)) + " values, got " +
                      std::to_string(v.size()));
    ArrayX<T> a(v.size());
    for (size_t i = 0; i < v.size(); ++i) a[static_cast<Index>(i)] = v[i];
    return from_array(std::move(shape), std::move(a), requires_grad, false);
  }

  static Tensor randn(Shape shape, Rng& rng, T stddev = T(1),
                      bool requires_grad = false) {
    ArrayX<T> a(numel(shape));
    for (Index i = 0; i < a.size(); ++i)
      a[i] = static_cast<T>(rng.normal(0.0, static_cast<double>(stddev)));
    return from_array(std::move(shape), std::move(a), requires_grad, false);
  }

  static Tensor uniform(Shape shape, Rng& rng, T lo, T hi,
                        bool requires_grad = false) {
    ArrayX<T> a(numel(shape));
    for (Index i = 0; i < a.size(); ++i)
      a[i] = static_cast<T>(
          rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
    return from_array(std::move(shape), std::move(a), requires_grad, false);
  }

  static Tensor from_array(Shape shape, ArrayX<T> value, bool requires_grad,
                           bool zero_fill = false) {
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    if (zero_fill)
      n->value = ArrayX<T>::Zero(numel(n->shape));
    else
      n->value = std::move(value);
    require_shape(n->value.size() == numel(n->shape),
                  "tensor value size does not match shape " +
                      shape_str(n->shape));
    n->requires_grad = requires_grad;
    n->leaf = true;
    return Tensor(std::move(n));
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  Index dim(size_t i) const { return node_->shape.at(i); }
  size_t rank() const { return node_->shape.size(); }
  Index size() const { return node_->value.size(); }

  const ArrayX<T>& array() const { return node_->value; }
  // Mutable access to a leaf's storage (parameters, inputs).
  ArrayX<T>& mutable_array() {
    require(node_->leaf, "mutable_array: tensor is not a leaf");
    return node_->value;
  }
  const T* data() const { return node_->value.data(); }
  T operator[](Index i) const { return node_->value[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool b) {
    require(node_->leaf, "set_requires_grad: tensor is not a leaf");
    node_->requires_grad = b;
  }
  bool is_leaf() const { return node_->leaf; }

  bool has_grad() const { return node_->grad.size() > 0; }
  const ArrayX<T>& grad() const {
    require(has_grad(), "grad(): no gradient present on tensor" +
                            (node_->name.empty() ? std::string()
                                                 : " '" + node_->name + "'"));
    return node_->grad;
  }
  void zero_grad() { node_->grad.resize(0); }

  void set_name(std::string name) { node_->name = std::move(name); }
  const std::string& name() const { return node_->name; }

  bool all_finite() const { return node_->value.isFinite().all(); }

  std::shared_ptr<Node<T>> node() const { return node_; }

  explicit Tensor(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<Node<T>> node_;
};

namespace detail {

// Records one executed op on the tape. The result participates in the graph
// only when some input requires grad; otherwise the node is a free-standing
// leaf and the tape stays empty (inference mode falls out naturally).
template <typename T>
Tensor<T> make_op(Shape shape, ArrayX<T> value,
                  std::initializer_list<Tensor<T>> inputs,
                  std::function<void(Node<T>&)> backward) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  require_shape(n->value.size() == numel(n->shape),
                "op produced " + std::to_string(n->value.size()) +
                    " values for shape " + shape_str(n->shape));
  bool needs = false;
  for (const auto& t : inputs) needs = needs || t.requires_grad();
  if (needs) {
    n->requires_grad = true;
    n->leaf = false;
    n->parents.reserve(inputs.size());
    for (const auto& t : inputs) n->parents.push_back(t.node());
    n->backward_fn = std::move(backward);
  }
  return Tensor<T>(std::move(n));
}

template <typename T>
Tensor<T> make_op(Shape shape, ArrayX<T> value,
                  const std::vector<Tensor<T>>& inputs,
                  std::function<void(Node<T>&)> backward) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool needs = false;
  for (const auto& t : inputs) needs = needs || t.requires_grad();
  if (needs) {
    n->requires_grad = true;
    n->leaf = false;
    n->parents.reserve(inputs.size());
    for (const auto& t : inputs) n->parents.push_back(t.node());
    n->backward_fn = std::move(backward);
  }
  return Tensor<T>(std::move(n));
}

}  // namespace detail

// Reverse-mode sweep from a scalar loss. Populates grads on every
// requires_grad tensor reachable from `loss`, then releases the tape so the
// next forward pass starts clean.
template <typename T>
void backward(const Tensor<T>& loss) {
  require(loss.size() == 1,
          "backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  Node<T>* root = loss.node().get();
  require(!root->consumed,
          "backward: tape already consumed; run a new forward pass first");
  if (root->leaf) {
    // A loss with no recorded graph: every upstream gradient is zero. This is
    // exactly what stop_gradient produces, so it is not an error.
    if (root->requires_grad) root->acc_grad(ArrayX<T>::Ones(1));
    return;
  }

  // Topological order via iterative post-order DFS.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, size_t>> stack;
  stack.push_back({root, 0});
  seen.insert(root);
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      Node<T>* p = n->parents[idx].get();
      ++idx;
      require(!p->consumed,
              "backward: graph references a node from an already-consumed "
              "tape; run a new forward pass first");
      if (!p->parents.empty() || p->requires_grad) {
        if (seen.insert(p).second) stack.push_back({p, 0});
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  root->grad = ArrayX<T>::Ones(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && n->grad.size() > 0) n->backward_fn(*n);
  }
  // Release the tape: interior nodes drop their closures and parent links.
  for (Node<T>* n : order) {
    if (!n->leaf) {
      n->backward_fn = nullptr;
      n->parents.clear();
      n->consumed = true;
    }
  }
}

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace cin
