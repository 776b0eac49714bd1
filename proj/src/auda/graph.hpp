#pragma once
// Reverse-mode automatic differentiation on a dynamically built tape.
//
// A Var<T> is a shared handle to a Node holding a value tensor, an optional
// gradient tensor, and a closure that scatters the node's gradient into its
// inputs.  Ops build the graph eagerly; backward() runs the closures in
// reverse topological order.  Everything is templated on the scalar type:
// training uses float, gradient checks instantiate the same code in double.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "auda/blas.hpp"
#include "auda/tensor.hpp"

namespace auda {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated lazily by ensure_grad()
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> inputs;
  std::function<void()> backward_fn;

  void ensure_grad() {
    if (grad.numel() == 0) grad = Tensor<T>(value.shape());
  }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
Var<T> make_var(Tensor<T> value, bool requires_grad = false) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

template <typename T>
Var<T> make_scalar(T v) {
  Tensor<T> t({1});
  t[0] = v;
  return make_var(std::move(t));
}

// Fresh constant copy of x's value, cut off from the graph.
template <typename T>
Var<T> detach(const Var<T>& x) {
  return make_var(x->value, false);
}

namespace detail {

template <typename T>
Var<T> new_op(Tensor<T> value, std::vector<Var<T>> inputs) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->inputs = std::move(inputs);
  for (const auto& in : n->inputs)
    if (in->requires_grad) n->requires_grad = true;
  return n;
}

template <typename T>
void accum(const Var<T>& in, const T* g, std::size_t n) {
  if (!in->requires_grad) return;
  in->ensure_grad();
  T* dst = in->grad.data();
  for (std::size_t i = 0; i < n; ++i) dst[i] += g[i];
}

}  // namespace detail

template <typename T>
void backward(const Var<T>& root) {
  if (root->value.numel() != 1)
    throw std::invalid_argument("backward: root must be a scalar");
  // iterative post-order DFS
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.push_back({root.get(), 0});
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child->requires_grad && !seen.count(child)) {
        seen.insert(child);
        stack.push_back({child, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->ensure_grad();
  root->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->requires_grad && n->backward_fn) n->backward_fn();
  }
}

// ---- pointwise ----

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  check_same_shape(a->value, b->value, "add");
  Tensor<T> y = a->value;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] += b->value[i];
  auto n = detail::new_op(std::move(y), {a, b});
  Node<T>* self = n.get();
  n->backward_fn = [self] {
    detail::accum(self->inputs[0], self->grad.data(), self->grad.numel());
    detail::accum(self->inputs[1], self->grad.data(), self->grad.numel());
  };
  return n;
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  check_same_shape(a->value, b->value, "sub");
  Tensor<T> y = a->value;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] -= b->value[i];
  auto n = detail::new_op(std::move(y), {a, b});
  Node<T>* self = n.get();
  n->backward_fn = [self] {
    detail::accum(self->inputs[0], self->grad.data(), self->grad.numel());
    const Var<T>& b_in = self->inputs[1];
    if (b_in->requires_grad) {
      b_in->ensure_grad();
      for (std::size_t i = 0; i < self->grad.numel(); ++i)
        b_in->grad[i] -= self->grad[i];
    }
  };
  return n;
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  check_same_shape(a->value, b->value, "mul");
  Tensor<T> y = a->value;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] *= b->value[i];
  auto n = detail::new_op(std::move(y), {a, b});
  Node<T>* self = n.get();
  n->backward_fn = [self] {
    const Var<T>& a_in = self->inputs[0];
    const Var<T>& b_in = self->inputs[1];
    if (a_in->requires_grad) {
      a_in->ensure_grad();
      for (std::size_t i = 0; i < self->grad.numel(); ++i)
        a_in->grad[i] += self->grad[i] * b_in->value[i];
    }
    if (b_in->requires_grad) {
      b_in->ensure_grad();
      for (std::size_t i = 0; i < self->grad.numel(); ++i)
        b_in->grad[i] += self->grad[i] * a_in->value[i];
    }
  };
  return n;
}

template <typename T>
Var<T> scalar_mul(const Var<T>& a, T c) {
  Tensor<T> y = a->value;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] *= c;
  auto n = detail::new_op(std::move(y), {a});
  Node<T>* self = n.get();
  n->backward_fn = [self, c] {
    const Var<T>& a_in = self->inputs[0];
    if (!a_in->requires_grad) return;
    a_in->ensure_grad();
    for (std::size_t i = 0; i < self->grad.numel(); ++i)
      a_in->grad[i] += self->grad[i] * c;
  };
  return n;
}

// c - x, elementwise
template <typename T>
Var<T> rsub_scalar(T c, const Var<T>& x) {
  Tensor<T> y = x->value;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = c - y[i];
  auto n = detail::new_op(std::move(y), {x});
  Node<T>* self = n.get();
  n->backward_fn = [self] {
    const Var<T>& x_in = self->inputs[0];
    if (!x_in->requires_grad) return;
    x_in->ensure_grad();
    for (std::size_t i = 0; i < self->grad.numel(); ++i)
      x_in->grad[i] -= self->grad[i];
  };
  return n;
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T negative_slope) {
  Tensor<T> y = x->value;
  for (std::size_t i = 0; i < y.numel(); ++i)
    if (y[i] < T(0)) y[i] *= negative_slope;
  auto n = detail::new_op(std::move(y), {x});
  Node<T>* self = n.get();
  n->backward_fn = [self, negative_slope] {
    const Var<T>& x_in = self->inputs[0];
    if (!x_in->requires_grad) return;
    x_in->ensure_grad();
    for (std::size_t i = 0; i < self->grad.numel(); ++i) {
      T s = x_in->value[i] > T(0) ? T(1) : negative_slope;
      x_in->grad[i] += self->grad[i] * s;
    }
  };
  return n;
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> y(x->value.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) {
    T v = x->value[i];
    if (v >= T(0)) {
      y[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      T e = std::exp(v);
      y[i] = e / (T(1) + e);
    }
  }
  auto n = detail::new_op(std::move(y), {x});
  Node<T>* self = n.get();
  n->backward_fn = [self] {
    const Var<T>& x_in = self->inputs[0];
    if (!x_in->requires_grad) return;
    x_in->ensure_grad();
    for (std::size_t i = 0; i < self->grad.numel(); ++i) {
      T s = self->value[i];
      x_in->grad[i] += self->grad[i] * s * (T(1) - s);
    }
  };
  return n;
}

// log of x clamped into [eps, 1-eps]; zero gradient where the clamp engages
template <typename T>
Var<T> log_clamped(const Var<T>& x, T eps) {
  Tensor<T> y(x->value.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) {
    T v = std::clamp(x->value[i], eps, T(1) - eps);
    y[i] = std::log(v);
  }
  auto n = detail::new_op(std::move(y), {x});
  Node<T>* self = n.get();
  n->backward_fn = [self, eps] {
    const Var<T>& x_in = self->inputs[0];
    if (!x_in->requires_grad) return;
    x_in->ensure_grad();
    for (std::size_t i = 0; i < self->grad.numel(); ++i) {
      T v = x_in->value[i];
      if (v > eps && v < T(1) - eps)
        x_in->grad[i] += self->grad[i] / v;
    }
  };
  return n;
}

// ---- reductions ----

template <typename T>
Var<T> sum_all(const Var<T>& x) {
  Tensor<T> y({1});
  T acc = T(0);
  for (std::size_t i = 0; i < x->value.numel(); ++i) acc += x->value[i];
  y[0] = acc;
  auto n = detail::new_op(std::move(y), {x});
  Node<T>* self = n.get();
  n->backward_fn = [self] {
    const Var<T>& x_in = self->inputs[0];
    if (!x_in->requires_grad) return;
    x_in->ensure_grad();
    T g = self->grad[0];
    for (std::size_t i = 0; i < x_in->grad.numel(); ++i) x_in->grad[i] += g;
  };
  return n;
}

template <typename T>
Var<T> mean_all(const Var<T>& x) {
  std::size_t m = x->value.numel();
  return scalar_mul(sum_all(x), T(1) / static_cast<T>(m));
}

// ---- shape plumbing ----

template <typename T>
Var<T> reshape(const Var<T>& x, Shape s) {
  Tensor<T> y = x->value.reshaped(std::move(s));
  auto n = detail::new_op(std::move(y), {x});
  Node<T>* self = n.get();
  n->backward_fn = [self] {
    detail::accum(self->inputs[0], self->grad.data(), self->grad.numel());
  };
  return n;
}

// Stacks a and b along axis 0.  Trailing dims must agree.
template <typename T>
Var<T> concat_rows(const Var<T>& a, const Var<T>& b) {
  const Shape& sa = a->value.shape();
  const Shape& sb = b->value.shape();
  if (sa.size() != sb.size() ||
      !std::equal(sa.begin() + 1, sa.end(), sb.begin() + 1))
    throw std::invalid_argument("concat_rows: trailing dims differ " +
                                shape_str(sa) + " vs " + shape_str(sb));
  Shape so = sa;
  so[0] = sa[0] + sb[0];
  Tensor<T> y(so);
  std::copy(a->value.data(), a->value.data() + a->value.numel(), y.data());
  std::copy(b->value.data(), b->value.data() + b->value.numel(),
            y.data() + a->value.numel());
  auto n = detail::new_op(std::move(y), {a, b});
  Node<T>* self = n.get();
  n->backward_fn = [self] {
    std::size_t na = self->inputs[0]->value.numel();
    detail::accum(self->inputs[0], self->grad.data(), na);
    detail::accum(self->inputs[1], self->grad.data() + na,
                  self->inputs[1]->value.numel());
  };
  return n;
}

// Rows [r0, r1) along axis 0.
template <typename T>
Var<T> slice_rows(const Var<T>& x, std::size_t r0, std::size_t r1) {
  const Shape& s = x->value.shape();
  if (r1 > s[0] || r0 >= r1)
    throw std::invalid_argument("slice_rows: bad range");
  std::size_t stride = x->value.numel() / s[0];
  Shape so = s;
  so[0] = r1 - r0;
  Tensor<T> y(so);
  std::copy(x->value.data() + r0 * stride, x->value.data() + r1 * stride,
            y.data());
  auto n = detail::new_op(std::move(y), {x});
  Node<T>* self = n.get();
  n->backward_fn = [self, r0, stride] {
    const Var<T>& x_in = self->inputs[0];
    if (!x_in->requires_grad) return;
    x_in->ensure_grad();
    T* dst = x_in->grad.data() + r0 * stride;
    for (std::size_t i = 0; i < self->grad.numel(); ++i)
      dst[i] += self->grad[i];
  };
  return n;
}

// Concatenates along axis 1 ([B,D] features or [B,C,H,W] channels).
template <typename T>
Var<T> concat_axis1(const Var<T>& a, const Var<T>& b) {
  const Shape& sa = a->value.shape();
  const Shape& sb = b->value.shape();
  if (sa.size() != sb.size() || sa.size() < 2 || sa[0] != sb[0] ||
      !std::equal(sa.begin() + 2, sa.end(), sb.begin() + 2))
    throw std::invalid_argument("concat_axis1: incompatible " + shape_str(sa) +
                                " vs " + shape_str(sb));
  std::size_t rest = 1;
  for (std::size_t i = 2; i < sa.size(); ++i) rest *= sa[i];
  std::size_t wa = sa[1] * rest, wb = sb[1] * rest;
  Shape so = sa;
  so[1] = sa[1] + sb[1];
  Tensor<T> y(so);
  for (std::size_t r = 0; r < sa[0]; ++r) {
    std::copy(a->value.data() + r * wa, a->value.data() + (r + 1) * wa,
              y.data() + r * (wa + wb));
    std::copy(b->value.data() + r * wb, b->value.data() + (r + 1) * wb,
              y.data() + r * (wa + wb) + wa);
  }
  auto n = detail::new_op(std::move(y), {a, b});
  Node<T>* self = n.get();
  n->backward_fn = [self, wa, wb] {
    const Var<T>& a_in = self->inputs[0];
    const Var<T>& b_in = self->inputs[1];
    std::size_t rows = a_in->value.shape()[0];
    if (a_in->requires_grad) {
      a_in->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < wa; ++i)
          a_in->grad[r * wa + i] += self->grad[r * (wa + wb) + i];
    }
    if (b_in->requires_grad) {
      b_in->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < wb; ++i)
          b_in->grad[r * wb + i] += self->grad[r * (wa + wb) + wa + i];
    }
  };
  return n;
}

// ---- linear algebra ----

// y = x W^T + b with x [B,Din], w [Dout,Din], b [Dout]
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  const Shape& sx = x->value.shape();
  const Shape& sw = w->value.shape();
  if (sx.size() != 2 || sw.size() != 2 || sx[1] != sw[1])
    throw std::invalid_argument("linear: shapes " + shape_str(sx) + " x " +
                                shape_str(sw));
  std::size_t B = sx[0], din = sx[1], dout = sw[0];
  if (b->value.numel() != dout)
    throw std::invalid_argument("linear: bias size mismatch");
  Tensor<T> y({B, dout});
  gemm(false, true, B, dout, din, T(1), x->value.data(), din, w->value.data(),
       din, T(0), y.data(), dout);
  for (std::size_t r = 0; r < B; ++r)
    for (std::size_t c = 0; c < dout; ++c) y.at2(r, c) += b->value[c];
  auto n = detail::new_op(std::move(y), {x, w, b});
  Node<T>* self = n.get();
  n->backward_fn = [self, B, din, dout] {
    const Var<T>& x_in = self->inputs[0];
    const Var<T>& w_in = self->inputs[1];
    const Var<T>& b_in = self->inputs[2];
    const T* gy = self->grad.data();
    if (x_in->requires_grad) {
      x_in->ensure_grad();
      gemm(false, false, B, din, dout, T(1), gy, dout, w_in->value.data(), din,
           T(1), x_in->grad.data(), din);
    }
    if (w_in->requires_grad) {
      w_in->ensure_grad();
      gemm(true, false, dout, din, B, T(1), gy, dout, x_in->value.data(), din,
           T(1), w_in->grad.data(), din);
    }
    if (b_in->requires_grad) {
      b_in->ensure_grad();
      for (std::size_t r = 0; r < B; ++r)
        for (std::size_t c = 0; c < dout; ++c)
          b_in->grad[c] += gy[r * dout + c];
    }
  };
  return n;
}

}  // namespace auda
