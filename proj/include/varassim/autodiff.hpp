/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "varassim/tensor.hpp"

/// Reverse-mode automatic differentiation over dense tensors.
///
/// Every backward rule is itself written with differentiable operations, so
/// gradients computed with `create_graph = true` can be differentiated again.
/// The trainable solver relies on this: the state update consumes the gradient
/// of the variational cost, and training differentiates through that update.
namespace varassim::ad {

class Var;

using BackwardFn = std::function<std::vector<Var>(const Var & grad_out, const Var & out)>;

struct Node : std::enable_shared_from_this<Node> {
  Tensor value;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
  const char * op = "leaf";
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Tensor value);
  /// Leaf that participates in differentiation (a parameter or an input of interest).
  static Var leaf(Tensor value, bool requires_grad = true);

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Tensor & value() const;
  const Shape & shape() const { return value().shape(); }
  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  Node * node() const noexcept { return node_.get(); }
  const std::shared_ptr<Node> & shared() const noexcept { return node_; }

  /// Same value, cut from the graph.
  Var detach() const { return constant(value()); }

  /// Overwrites a leaf's value in place (optimizer updates). Not for interior nodes.
  void assign(Tensor value);

 private:
  std::shared_ptr<Node> node_;
};

bool grad_enabled() noexcept;

/// Disables graph recording in the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard & operator=(const NoGradGuard &) = delete;

 private:
  bool previous_;
};

/// Builds a result node; records history only when grad mode is on and an input requires grad.
Var make_result(Tensor value, std::vector<Var> inputs, BackwardFn backward, const char * op);

/// Gradients of a scalar `output` with respect to `inputs`. Inputs not reached receive zeros.
/// With `create_graph` the returned gradients are themselves differentiable.
std::vector<Var> grad(const Var & output, const std::vector<Var> & inputs,
                      bool create_graph = false);

// Elementwise arithmetic (operands must share a shape).
Var operator+(const Var & a, const Var & b);
Var operator-(const Var & a, const Var & b);
Var operator*(const Var & a, const Var & b);
Var operator-(const Var & a);
Var scale(const Var & a, double c);
/// a * x + b elementwise with scalar constants.
Var affine(const Var & x, double a, double b);
/// Tensor times a one-element variable.
Var mul_scalar(const Var & x, const Var & s);

Var tanh(const Var & x);
Var sigmoid(const Var & x);
Var exp(const Var & x);
Var relu(const Var & x);

/// Sum of all entries, shape {1}.
Var sum(const Var & x);
Var sum_sq(const Var & x);
/// Broadcast a one-element variable to `shape`.
Var expand(const Var & s, const Shape & shape);

Var reshape(const Var & x, const Shape & shape);
/// Rows [begin, begin + count) of the leading axis.
Var slice(const Var & x, int begin, int count);
/// Adjoint of slice: embeds x at `begin` of a zero tensor with `total` leading rows.
Var pad(const Var & x, int begin, int total);
/// Concatenation along the leading axis.
Var concat(const std::vector<Var> & parts);

/// Fixed linear operator given by a forward map and its adjoint.
struct LinearOp {
  std::string name;
  std::function<Tensor(const Tensor &)> forward;
  std::function<Tensor(const Tensor &)> adjoint;

  LinearOp transposed() const { return {name + "^T", adjoint, forward}; }
};

Var apply(const LinearOp & op, const Var & x);

/// Same-size ("zero padded") 2-D convolution, stride 1, odd square kernel.
/// x: [C,H,W] or [N,C,H,W]; w: [O,C,K,K]. Returns [O,H,W] or [N,O,H,W].
Var conv2d(const Var & x, const Var & w);
/// Adjoint of conv2d in its input: g [(N,)O,H,W] -> [(N,)C,H,W].
Var conv2d_input_grad(const Var & g, const Var & w);
/// Adjoint of conv2d in its kernel: returns [O,C,K,K] for kernel size `ksize`.
Var conv2d_weight_grad(const Var & x, const Var & g, int ksize);
/// Adds b[C] along the channel axis of [C,H,W] or [N,C,H,W].
Var add_bias(const Var & x, const Var & b);

}  // namespace varassim::ad
