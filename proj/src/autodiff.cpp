/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "varassim/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "conv_kernels.hpp"
#include "varassim/errors.hpp"

namespace varassim::ad {

namespace {

thread_local bool t_grad_enabled = true;

class GradEnableGuard {
 public:
  GradEnableGuard() : previous_(t_grad_enabled) { t_grad_enabled = true; }
  ~GradEnableGuard() { t_grad_enabled = previous_; }

 private:
  bool previous_;
};

Tensor zip(const Tensor & a, const Tensor & b, const char * context, auto && fn) {
  require_same_shape(a, b, context);
  Tensor out(a.shape());
  const double * pa = a.data();
  const double * pb = b.data();
  double * po = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) po[i] = fn(pa[i], pb[i]);
  return out;
}

Tensor map(const Tensor & a, auto && fn) {
  Tensor out(a.shape());
  const double * pa = a.data();
  double * po = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) po[i] = fn(pa[i]);
  return out;
}

LinearOp channel_broadcast(const Shape & target) {
  const bool batched = target.size() == 4;
  const int batch = batched ? target[0] : 1;
  const int channels = target[target.size() - 3];
  const std::size_t plane = static_cast<std::size_t>(target[target.size() - 2]) * target.back();
  LinearOp op;
  op.name = "channel_broadcast";
  op.forward = [=](const Tensor & b) {
    Tensor out(target);
    double * po = out.data();
    for (int n = 0; n < batch; ++n)
      for (int c = 0; c < channels; ++c) {
        double * dst = po + (static_cast<std::size_t>(n) * channels + c) * plane;
        std::fill(dst, dst + plane, b[c]);
      }
    return out;
  };
  op.adjoint = [=](const Tensor & g) {
    Tensor out({channels});
    const double * pg = g.data();
    for (int n = 0; n < batch; ++n)
      for (int c = 0; c < channels; ++c) {
        const double * src = pg + (static_cast<std::size_t>(n) * channels + c) * plane;
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += src[i];
        out[c] += s;
      }
    return out;
  };
  return op;
}

std::size_t row_size(const Tensor & t) {
  return t.rank() == 0 || t.dim(0) == 0 ? 0 : t.size() / t.dim(0);
}

}  // namespace

// --- Var -------------------------------------------------------------------

Var Var::constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = "constant";
  return Var(std::move(node));
}

Var Var::leaf(Tensor value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Var(std::move(node));
}

const Tensor & Var::value() const {
  if (!node_) throw std::logic_error("access to undefined Var");
  return node_->value;
}

void Var::assign(Tensor value) {
  if (!node_ || !node_->inputs.empty()) throw std::logic_error("assign() requires a leaf Var");
  require_same_shape(node_->value, value, "Var::assign");
  node_->value = std::move(value);
}

bool grad_enabled() noexcept { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

Var make_result(Tensor value, std::vector<Var> inputs, BackwardFn backward, const char * op) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  if (t_grad_enabled &&
      std::any_of(inputs.begin(), inputs.end(), [](const Var & v) { return v.requires_grad(); })) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const Var & v : inputs) node->inputs.push_back(v.shared());
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

// --- reverse sweep ---------------------------------------------------------

std::vector<Var> grad(const Var & output, const std::vector<Var> & inputs, bool create_graph) {
  if (output.value().size() != 1) {
    throw DimensionError("grad: output must be a scalar, got " + to_string(output.shape()));
  }
  std::vector<Var> result;
  result.reserve(inputs.size());
  std::unordered_set<Node *> targets;
  for (const Var & v : inputs) {
    if (v.requires_grad()) targets.insert(v.node());
  }

  std::unordered_map<Node *, Var> grads;
  if (output.requires_grad() && !targets.empty()) {
    // Post-order DFS restricted to nodes that depend on a target.
    std::vector<Node *> order;
    std::unordered_map<Node *, bool> relevant;
    std::vector<std::pair<Node *, std::size_t>> stack;
    stack.emplace_back(output.node(), 0);
    relevant.emplace(output.node(), false);
    while (!stack.empty()) {
      auto & [node, next] = stack.back();
      if (next < node->inputs.size()) {
        Node * child = node->inputs[next++].get();
        if (child->requires_grad && relevant.emplace(child, false).second) {
          stack.emplace_back(child, 0);
        }
        continue;
      }
      bool rel = targets.count(node) > 0;
      for (const auto & in : node->inputs) {
        auto it = relevant.find(in.get());
        if (it != relevant.end() && it->second) {
          rel = true;
          break;
        }
      }
      relevant[node] = rel;
      order.push_back(node);
      stack.pop_back();
    }

    std::optional<NoGradGuard> no_grad;
    std::optional<GradEnableGuard> with_grad;
    if (create_graph) {
      with_grad.emplace();
    } else {
      no_grad.emplace();
    }

    grads.emplace(output.node(), Var::constant(Tensor(output.shape(), 1.0)));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node * node = *it;
      if (!relevant[node]) continue;
      auto found = grads.find(node);
      if (found == grads.end()) continue;
      if (node->backward) {
        const Var g = found->second;
        const Var out(node->shared_from_this());
        std::vector<Var> in_grads = node->backward(g, out);
        for (std::size_t i = 0; i < node->inputs.size() && i < in_grads.size(); ++i) {
          Node * in = node->inputs[i].get();
          if (!in->requires_grad || !in_grads[i].defined() || !relevant[in]) continue;
          auto [slot, inserted] = grads.try_emplace(in, in_grads[i]);
          if (!inserted) slot->second = slot->second + in_grads[i];
        }
      }
      if (!targets.count(node)) grads.erase(node);
    }
  }

  for (const Var & v : inputs) {
    auto it = v.defined() ? grads.find(v.node()) : grads.end();
    if (it != grads.end()) {
      result.push_back(create_graph ? it->second : it->second.detach());
    } else {
      result.push_back(Var::constant(Tensor(v.defined() ? v.shape() : Shape{1})));
    }
  }
  return result;
}

// --- elementwise -------------------------------------------------------------

Var operator+(const Var & a, const Var & b) {
  Tensor v = zip(a.value(), b.value(), "add", [](double x, double y) { return x + y; });
  return make_result(std::move(v), {a, b},
                     [](const Var & g, const Var &) { return std::vector<Var>{g, g}; }, "add");
}

Var operator-(const Var & a, const Var & b) {
  Tensor v = zip(a.value(), b.value(), "sub", [](double x, double y) { return x - y; });
  return make_result(std::move(v), {a, b},
                     [](const Var & g, const Var &) { return std::vector<Var>{g, -g}; }, "sub");
}

Var operator*(const Var & a, const Var & b) {
  Tensor v = zip(a.value(), b.value(), "mul", [](double x, double y) { return x * y; });
  return make_result(
      std::move(v), {a, b},
      [a, b](const Var & g, const Var &) {
        return std::vector<Var>{a.requires_grad() ? g * b : Var(),
                                b.requires_grad() ? g * a : Var()};
      },
      "mul");
}

Var operator-(const Var & a) { return scale(a, -1.0); }

Var scale(const Var & a, double c) {
  return make_result(
      map(a.value(), [c](double x) { return c * x; }), {a},
      [c](const Var & g, const Var &) { return std::vector<Var>{scale(g, c)}; }, "scale");
}

Var affine(const Var & x, double a, double b) {
  return make_result(
      map(x.value(), [a, b](double v) { return a * v + b; }), {x},
      [a](const Var & g, const Var &) { return std::vector<Var>{scale(g, a)}; }, "affine");
}

Var mul_scalar(const Var & x, const Var & s) {
  const double sv = s.value().item();
  return make_result(
      map(x.value(), [sv](double v) { return v * sv; }), {x, s},
      [x, s](const Var & g, const Var &) {
        return std::vector<Var>{x.requires_grad() ? mul_scalar(g, s) : Var(),
                                s.requires_grad() ? sum(g * x) : Var()};
      },
      "mul_scalar");
}

Var tanh(const Var & x) {
  return make_result(
      map(x.value(), [](double v) { return std::tanh(v); }), {x},
      [](const Var & g, const Var & y) { return std::vector<Var>{g * affine(y * y, -1.0, 1.0)}; },
      "tanh");
}

Var sigmoid(const Var & x) {
  return make_result(
      map(x.value(), [](double v) { return 1.0 / (1.0 + std::exp(-v)); }), {x},
      [](const Var & g, const Var & y) {
        return std::vector<Var>{g * (y * affine(y, -1.0, 1.0))};
      },
      "sigmoid");
}

Var exp(const Var & x) {
  return make_result(
      map(x.value(), [](double v) { return std::exp(v); }), {x},
      [](const Var & g, const Var & y) { return std::vector<Var>{g * y}; }, "exp");
}

Var relu(const Var & x) {
  return make_result(
      map(x.value(), [](double v) { return v > 0.0 ? v : 0.0; }), {x},
      [x](const Var & g, const Var &) {
        Var step = Var::constant(map(x.value(), [](double v) { return v > 0.0 ? 1.0 : 0.0; }));
        return std::vector<Var>{g * step};
      },
      "relu");
}

// --- reductions and shape ----------------------------------------------------

Var sum(const Var & x) {
  const Shape shape = x.shape();
  return make_result(
      Tensor::scalar(x.value().sum()), {x},
      [shape](const Var & g, const Var &) { return std::vector<Var>{expand(g, shape)}; }, "sum");
}

Var sum_sq(const Var & x) { return sum(x * x); }

Var expand(const Var & s, const Shape & shape) {
  return make_result(
      Tensor(shape, s.value().item()), {s},
      [](const Var & g, const Var &) { return std::vector<Var>{sum(g)}; }, "expand");
}

Var reshape(const Var & x, const Shape & shape) {
  const Shape original = x.shape();
  return make_result(
      x.value().reshaped(shape), {x},
      [original](const Var & g, const Var &) {
        return std::vector<Var>{reshape(g, original)};
      },
      "reshape");
}

Var slice(const Var & x, int begin, int count) {
  const Tensor & xv = x.value();
  if (xv.rank() == 0 || begin < 0 || count < 0 || begin + count > xv.dim(0)) {
    throw DimensionError("slice [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " +
                         to_string(xv.shape()));
  }
  Shape shape = xv.shape();
  shape[0] = count;
  const std::size_t row = row_size(xv);
  std::vector<double> values(xv.data() + begin * row, xv.data() + (begin + count) * row);
  const int total = xv.dim(0);
  return make_result(
      Tensor(std::move(shape), std::move(values)), {x},
      [begin, total](const Var & g, const Var &) {
        return std::vector<Var>{pad(g, begin, total)};
      },
      "slice");
}

Var pad(const Var & x, int begin, int total) {
  const Tensor & xv = x.value();
  if (begin < 0 || begin + xv.dim(0) > total) {
    throw DimensionError("pad: rows do not fit in " + std::to_string(total));
  }
  Shape shape = xv.shape();
  shape[0] = total;
  Tensor out(shape);
  std::copy(xv.data(), xv.data() + xv.size(), out.data() + begin * row_size(xv));
  const int count = xv.dim(0);
  return make_result(
      std::move(out), {x},
      [begin, count](const Var & g, const Var &) {
        return std::vector<Var>{slice(g, begin, count)};
      },
      "pad");
}

Var concat(const std::vector<Var> & parts) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  Shape shape = parts.front().shape();
  int rows = 0;
  for (const Var & p : parts) {
    Shape tail = p.shape();
    if (tail.size() != shape.size() || !std::equal(tail.begin() + 1, tail.end(), shape.begin() + 1)) {
      throw DimensionError("concat: incompatible shapes " + to_string(shape) + " and " +
                           to_string(tail));
    }
    rows += tail[0];
  }
  shape[0] = rows;
  Tensor out(shape);
  std::vector<int> offsets;
  std::size_t at = 0;
  int row = 0;
  for (const Var & p : parts) {
    offsets.push_back(row);
    row += p.shape()[0];
    std::copy(p.value().data(), p.value().data() + p.value().size(), out.data() + at);
    at += p.value().size();
  }
  std::vector<int> counts;
  for (const Var & p : parts) counts.push_back(p.shape()[0]);
  return make_result(
      std::move(out), parts,
      [offsets, counts, parts](const Var & g, const Var &) {
        std::vector<Var> grads;
        for (std::size_t i = 0; i < offsets.size(); ++i) {
          grads.push_back(parts[i].requires_grad() ? slice(g, offsets[i], counts[i]) : Var());
        }
        return grads;
      },
      "concat");
}

Var apply(const LinearOp & op, const Var & x) {
  auto shared = std::make_shared<const LinearOp>(op);
  return make_result(
      op.forward(x.value()), {x},
      [shared](const Var & g, const Var &) {
        return std::vector<Var>{apply(shared->transposed(), g)};
      },
      "linear");
}

// --- convolution family ------------------------------------------------------

Var conv2d(const Var & x, const Var & w) {
  const int k = w.value().rank() == 4 ? w.value().dim(2) : 0;
  return make_result(
      kernels::conv2d_forward(x.value(), w.value()), {x, w},
      [x, w, k](const Var & g, const Var &) {
        return std::vector<Var>{x.requires_grad() ? conv2d_input_grad(g, w) : Var(),
                                w.requires_grad() ? conv2d_weight_grad(x, g, k) : Var()};
      },
      "conv2d");
}

Var conv2d_input_grad(const Var & g_in, const Var & w) {
  const int k = w.value().rank() == 4 ? w.value().dim(2) : 0;
  return make_result(
      kernels::conv2d_input_grad(g_in.value(), w.value()), {g_in, w},
      [g_in, w, k](const Var & g, const Var &) {
        return std::vector<Var>{g_in.requires_grad() ? conv2d(g, w) : Var(),
                                w.requires_grad() ? conv2d_weight_grad(g, g_in, k) : Var()};
      },
      "conv2d_input_grad");
}

Var conv2d_weight_grad(const Var & x, const Var & g_in, int ksize) {
  return make_result(
      kernels::conv2d_weight_grad(x.value(), g_in.value(), ksize), {x, g_in},
      [x, g_in](const Var & g, const Var &) {
        return std::vector<Var>{x.requires_grad() ? conv2d_input_grad(g_in, g) : Var(),
                                g_in.requires_grad() ? conv2d(x, g) : Var()};
      },
      "conv2d_weight_grad");
}

Var add_bias(const Var & x, const Var & b) {
  const Shape & shape = x.shape();
  if (shape.size() < 3 || b.value().rank() != 1 || b.value().dim(0) != shape[shape.size() - 3]) {
    throw DimensionError("add_bias: bias " + to_string(b.shape()) + " does not match " +
                         to_string(shape));
  }
  return x + apply(channel_broadcast(shape), b);
}

}  // namespace varassim::ad
