#pragma once

// Reverse-mode autodiff over a fixed catalog of primitives. Values are nodes
// of an implicit tape; creation order is a valid topological order, so the
// backward sweep visits reachable nodes in decreasing sequence number.
// Gradient construction is confined to one logical execution stream;
// independent tapes may run concurrently.

#include <algorithm>
#include <atomic>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "reskan/errors.hpp"
#include "reskan/tensor.hpp"

namespace reskan {

// A named learnable tensor with an accumulated gradient of identical shape.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(T(0)); }
};

namespace ag {

inline std::atomic<int64_t>& node_counter() {
  static std::atomic<int64_t> c{0};
  return c;
}

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool has_grad = false;
  bool requires_grad = false;
  int64_t seq = 0;
  const char* op = "leaf";
  Parameter<T>* param = nullptr;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  void accum_grad(const Tensor<T>& g) {
    if (!has_grad) {
      grad = Tensor<T>(value.shape());
      has_grad = true;
    }
    grad.add_(g);
  }

  Tensor<T>& ensure_grad() {
    if (!has_grad) {
      grad = Tensor<T>(value.shape());
      has_grad = true;
    }
    return grad;
  }
};

template <typename T>
class Var {
 public:
  Var() = default;

  static Var leaf(Tensor<T> v, bool requires_grad = false) {
    Var r;
    r.n_ = std::make_shared<Node<T>>();
    r.n_->value = std::move(v);
    r.n_->requires_grad = requires_grad;
    r.n_->seq = node_counter()++;
    return r;
  }

  static Var constant(Tensor<T> v) { return leaf(std::move(v), false); }

  static Var from_param(Parameter<T>& p) {
    Var r = leaf(p.value, true);
    r.n_->param = &p;
    r.n_->op = "param";
    return r;
  }

  static Var make_op(const char* op, Tensor<T> value, std::vector<Var> inputs,
                     std::function<void(Node<T>&)> backward) {
    Var r;
    r.n_ = std::make_shared<Node<T>>();
    r.n_->value = std::move(value);
    r.n_->op = op;
    bool req = false;
    for (auto& in : inputs) {
      req = req || in.n_->requires_grad;
      r.n_->inputs.push_back(in.n_);
    }
    r.n_->requires_grad = req;
    if (req) r.n_->backward = std::move(backward);
    r.n_->seq = node_counter()++;
#ifndef NDEBUG
    if (r.n_->value.has_nan()) throw TrainError(std::string("NaN produced by op ") + op);
#endif
    return r;
  }

  const Tensor<T>& value() const { return n_->value; }
  const Tensor<T>& grad() const { return n_->grad; }
  bool has_grad() const { return n_ && n_->has_grad; }
  bool requires_grad() const { return n_ && n_->requires_grad; }
  std::shared_ptr<Node<T>> node() const { return n_; }
  bool defined() const { return n_ != nullptr; }

 private:
  std::shared_ptr<Node<T>> n_;
};

// Reverse sweep from a scalar root. Gradients accumulate with += across
// multiple uses of a node; parameter leaves flush into Parameter::grad.
template <typename T>
void backward(const Var<T>& root) {
  if (!root.defined()) throw UsageError("backward called on an empty value");
  if (root.value().numel() != 1) throw UsageError("backward requires a scalar root, got shape " +
                                                  Tensor<T>::shape_str(root.value().shape()));
  // Collect the reachable subgraph.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<Node<T>*> stack{root.node().get()};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (auto& in : n->inputs)
      if (seen.insert(in.get()).second) stack.push_back(in.get());
  }
  std::sort(order.begin(), order.end(), [](Node<T>* a, Node<T>* b) { return a->seq > b->seq; });

  root.node()->accum_grad(Tensor<T>::ones(root.value().shape()));
  for (Node<T>* n : order) {
    if (!n->has_grad || !n->requires_grad) continue;
    if (n->backward) n->backward(*n);
    if (n->param) n->param->grad.add_(n->grad);
  }
}

}  // namespace ag
}  // namespace reskan
