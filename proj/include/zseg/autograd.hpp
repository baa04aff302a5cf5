#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "zseg/tensor.hpp"

namespace zseg {

template <class T>
struct BasicNode;

/// One value in the dynamic computation graph.
///
/// `backward_fn` reads `grad` of this node and accumulates into the
/// parents' gradient buffers. Leaves (inputs, parameters) have no parents.
template <class T>
struct BasicNode {
  BasicTensor<T> value;
  BasicTensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<BasicNode>> parents;
  std::function<void(BasicNode&)> backward_fn;

  /// Allocates the zero-filled gradient buffer on first use.
  BasicTensor<T>& grad_buffer() {
    if (grad.empty() && value.numel() > 0) grad = BasicTensor<T>(value.shape());
    return grad;
  }
};

bool grad_enabled();

/// Handle to a graph node. Cheap to copy; copies alias the same node.
template <class T>
class BasicVar {
public:
  using Node = BasicNode<T>;
  using NodePtr = std::shared_ptr<Node>;
  using TensorType = BasicTensor<T>;

  BasicVar() = default;
  explicit BasicVar(TensorType value, bool requires_grad = false)
      : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  const TensorType& value() const { return node_->value; }
  TensorType& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }

  /// Gradient buffer; zero-filled when nothing has been accumulated.
  TensorType& grad() { return node_->grad_buffer(); }
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  void zero_grad() {
    if (node_ && !node_->grad.empty()) node_->grad.fill(T(0));
  }

  const NodePtr& node() const { return node_; }

  /// Builds a result node. Records parents and the backward rule only when
  /// gradient recording is on and some input requires a gradient.
  static BasicVar make_result(TensorType value, std::vector<BasicVar> inputs,
                              std::function<void(Node&)> backward_fn) {
    BasicVar out(std::move(value), false);
    if (!grad_enabled()) return out;
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (!any) return out;
    out.node_->requires_grad = true;
    out.node_->parents.reserve(inputs.size());
    for (auto& in : inputs) out.node_->parents.push_back(in.node_);
    out.node_->backward_fn = std::move(backward_fn);
    return out;
  }

private:
  NodePtr node_;
};

using Var = BasicVar<float>;
using Var64 = BasicVar<double>;

/// Reverse-mode sweep from a scalar (numel == 1) loss. Gradients accumulate
/// into every reachable node that requires them.
template <class T>
void backward(const BasicVar<T>& loss);

extern template void backward<float>(const BasicVar<float>&);
extern template void backward<double>(const BasicVar<double>&);

/// Disables graph recording for its lifetime (inference).
class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
  bool previous_;
};

}  // namespace zseg
