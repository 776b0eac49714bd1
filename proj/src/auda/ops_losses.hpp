#pragma once
// Fused graph ops backing the training objectives: cosine rows, row
// normalization, multi-label BCE, L1/L2 discrepancies, and the two
// contrastive losses.  Each op computes its own exact backward pass; the
// composite objectives in losses.hpp are thin combinations of these.

#include <array>
#include <cmath>
#include <vector>

#include "auda/graph.hpp"

namespace auda {

inline constexpr double kCosineNormFloor = 1e-8;

// y_i = x_i / sqrt(|x_i|^2 + eps), rows of a [B,D] matrix
template <typename T>
Var<T> row_l2_normalize(const Var<T>& x, T eps = T(1e-12)) {
  const Shape& s = x->value.shape();
  if (s.size() != 2) throw std::invalid_argument("row_l2_normalize: need 2-d");
  const std::size_t B = s[0], D = s[1];
  Tensor<T> y({B, D});
  std::vector<T> rinv(B);
  for (std::size_t r = 0; r < B; ++r) {
    T ss = T(0);
    for (std::size_t c = 0; c < D; ++c) ss += x->value.at2(r, c) * x->value.at2(r, c);
    rinv[r] = T(1) / std::sqrt(ss + eps);
    for (std::size_t c = 0; c < D; ++c) y.at2(r, c) = x->value.at2(r, c) * rinv[r];
  }
  auto n = detail::new_op(std::move(y), {x});
  Node<T>* self = n.get();
  n->backward_fn = [self, B, D, rinv = std::move(rinv)] {
    const Var<T>& x_in = self->inputs[0];
    if (!x_in->requires_grad) return;
    x_in->ensure_grad();
    for (std::size_t r = 0; r < B; ++r) {
      T dot = T(0);
      for (std::size_t c = 0; c < D; ++c)
        dot += x_in->value.at2(r, c) * self->grad.at2(r, c);
      T ri = rinv[r], ri3 = ri * ri * ri;
      for (std::size_t c = 0; c < D; ++c)
        x_in->grad.at2(r, c) +=
            ri * self->grad.at2(r, c) - ri3 * dot * x_in->value.at2(r, c);
    }
  };
  return n;
}

// Row-wise cosine similarity of two [B,D] matrices -> [B].  Rows whose norm
// falls below 1e-8 contribute cosine 0 with zero gradient.
template <typename T>
Var<T> row_cosine(const Var<T>& a, const Var<T>& b) {
  check_same_shape(a->value, b->value, "row_cosine");
  const Shape& s = a->value.shape();
  if (s.size() != 2) throw std::invalid_argument("row_cosine: need 2-d");
  const std::size_t B = s[0], D = s[1];
  Tensor<T> y({B});
  for (std::size_t r = 0; r < B; ++r) {
    T na = T(0), nb = T(0), ab = T(0);
    for (std::size_t c = 0; c < D; ++c) {
      na += a->value.at2(r, c) * a->value.at2(r, c);
      nb += b->value.at2(r, c) * b->value.at2(r, c);
      ab += a->value.at2(r, c) * b->value.at2(r, c);
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    y[r] = (na < T(kCosineNormFloor) || nb < T(kCosineNormFloor))
               ? T(0)
               : ab / (na * nb);
  }
  auto n = detail::new_op(std::move(y), {a, b});
  Node<T>* self = n.get();
  n->backward_fn = [self, B, D] {
    const Var<T>& a_in = self->inputs[0];
    const Var<T>& b_in = self->inputs[1];
    if (!a_in->requires_grad && !b_in->requires_grad) return;
    if (a_in->requires_grad) a_in->ensure_grad();
    if (b_in->requires_grad) b_in->ensure_grad();
    for (std::size_t r = 0; r < B; ++r) {
      T na = T(0), nb = T(0), ab = T(0);
      for (std::size_t c = 0; c < D; ++c) {
        na += a_in->value.at2(r, c) * a_in->value.at2(r, c);
        nb += b_in->value.at2(r, c) * b_in->value.at2(r, c);
        ab += a_in->value.at2(r, c) * b_in->value.at2(r, c);
      }
      na = std::sqrt(na);
      nb = std::sqrt(nb);
      if (na < T(kCosineNormFloor) || nb < T(kCosineNormFloor)) continue;
      T g = self->grad[r];
      T inv = T(1) / (na * nb);
      T cab = ab * inv;
      for (std::size_t c = 0; c < D; ++c) {
        if (a_in->requires_grad)
          a_in->grad.at2(r, c) +=
              g * (b_in->value.at2(r, c) * inv -
                   cab * a_in->value.at2(r, c) / (na * na));
        if (b_in->requires_grad)
          b_in->grad.at2(r, c) +=
              g * (a_in->value.at2(r, c) * inv -
                   cab * b_in->value.at2(r, c) / (nb * nb));
      }
    }
  };
  return n;
}

// Multi-label BCE on probabilities: mean over rows of the summed per-label
// binary cross-entropy.  Probabilities are clamped into [eps, 1-eps] before
// the logs; the clamp kills the gradient where it engages.
template <typename T>
Var<T> bce_sum_mean(const Var<T>& probs, const Tensor<T>& targets,
                    T eps = T(1e-7)) {
  check_same_shape(probs->value, targets, "bce_sum_mean");
  const Shape& s = probs->value.shape();
  if (s.size() != 2) throw std::invalid_argument("bce_sum_mean: need 2-d");
  const std::size_t B = s[0], K = s[1];
  for (std::size_t i = 0; i < targets.numel(); ++i)
    if (targets[i] != T(0) && targets[i] != T(1))
      throw std::invalid_argument("bce_sum_mean: targets must be 0/1");
  T acc = T(0);
  for (std::size_t i = 0; i < B * K; ++i) {
    T p = std::clamp(probs->value[i], eps, T(1) - eps);
    acc -= targets[i] * std::log(p) + (T(1) - targets[i]) * std::log(T(1) - p);
  }
  Tensor<T> y({1});
  y[0] = acc / static_cast<T>(B);
  auto n = detail::new_op(std::move(y), {probs});
  Node<T>* self = n.get();
  n->backward_fn = [self, B, K, eps, targets] {
    const Var<T>& p_in = self->inputs[0];
    if (!p_in->requires_grad) return;
    p_in->ensure_grad();
    T g = self->grad[0] / static_cast<T>(B);
    for (std::size_t i = 0; i < B * K; ++i) {
      T p = p_in->value[i];
      if (p <= eps || p >= T(1) - eps) continue;
      p_in->grad[i] += g * (-targets[i] / p + (T(1) - targets[i]) / (T(1) - p));
    }
  };
  return n;
}

// Mean absolute difference over every element.
template <typename T>
Var<T> l1_mean(const Var<T>& a, const Var<T>& b) {
  check_same_shape(a->value, b->value, "l1_mean");
  const std::size_t m = a->value.numel();
  T acc = T(0);
  for (std::size_t i = 0; i < m; ++i)
    acc += std::abs(a->value[i] - b->value[i]);
  Tensor<T> y({1});
  y[0] = acc / static_cast<T>(m);
  auto n = detail::new_op(std::move(y), {a, b});
  Node<T>* self = n.get();
  n->backward_fn = [self, m] {
    const Var<T>& a_in = self->inputs[0];
    const Var<T>& b_in = self->inputs[1];
    T g = self->grad[0] / static_cast<T>(m);
    if (a_in->requires_grad) a_in->ensure_grad();
    if (b_in->requires_grad) b_in->ensure_grad();
    for (std::size_t i = 0; i < m; ++i) {
      T d = a_in->value[i] - b_in->value[i];
      T sgn = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
      if (a_in->requires_grad) a_in->grad[i] += g * sgn;
      if (b_in->requires_grad) b_in->grad[i] -= g * sgn;
    }
  };
  return n;
}

// Mean over rows of the squared L2 distance between matching rows.
template <typename T>
Var<T> mean_row_sqdist(const Var<T>& a, const Var<T>& b) {
  check_same_shape(a->value, b->value, "mean_row_sqdist");
  const Shape& s = a->value.shape();
  if (s.size() != 2) throw std::invalid_argument("mean_row_sqdist: need 2-d");
  const std::size_t B = s[0], m = a->value.numel();
  T acc = T(0);
  for (std::size_t i = 0; i < m; ++i) {
    T d = a->value[i] - b->value[i];
    acc += d * d;
  }
  Tensor<T> y({1});
  y[0] = acc / static_cast<T>(B);
  auto n = detail::new_op(std::move(y), {a, b});
  Node<T>* self = n.get();
  n->backward_fn = [self, B, m] {
    const Var<T>& a_in = self->inputs[0];
    const Var<T>& b_in = self->inputs[1];
    T g = self->grad[0] * T(2) / static_cast<T>(B);
    if (a_in->requires_grad) a_in->ensure_grad();
    if (b_in->requires_grad) b_in->ensure_grad();
    for (std::size_t i = 0; i < m; ++i) {
      T d = a_in->value[i] - b_in->value[i];
      if (a_in->requires_grad) a_in->grad[i] += g * d;
      if (b_in->requires_grad) b_in->grad[i] -= g * d;
    }
  };
  return n;
}

// Instance-level InfoNCE over one batch of embeddings.
//
// emb: [M,d] with unit-norm rows (the caller normalizes; checked here).
// partner[q] is the index of q's single positive; the denominator for anchor
// q runs over every other embedding, i.e. the positive plus M-2 negatives.
// Every embedding serves as an anchor once and the per-anchor losses are
// averaged.
template <typename T>
Var<T> icl_loss(const Var<T>& emb, const std::vector<std::size_t>& partner,
                T tau) {
  const Shape& s = emb->value.shape();
  if (s.size() != 2) throw std::invalid_argument("icl_loss: need 2-d");
  const std::size_t M = s[0], D = s[1];
  if (tau <= T(0)) throw std::invalid_argument("icl_loss: tau must be > 0");
  if (M < 3)
    throw std::invalid_argument("icl_loss: need at least 3 embeddings");
  if (partner.size() != M)
    throw std::invalid_argument("icl_loss: partner size mismatch");
  for (std::size_t q = 0; q < M; ++q) {
    if (partner[q] >= M || partner[q] == q || partner[partner[q]] != q)
      throw std::invalid_argument("icl_loss: partner map is not a pairing");
  }
  for (std::size_t r = 0; r < M; ++r) {
    T ss = T(0);
    for (std::size_t c = 0; c < D; ++c)
      ss += emb->value.at2(r, c) * emb->value.at2(r, c);
    if (std::abs(std::sqrt(ss) - T(1)) > T(1e-4))
      throw std::invalid_argument("icl_loss: embedding rows must be unit norm");
  }

  // similarity matrix S = E E^T
  Tensor<T> sim({M, M});
  gemm(false, true, M, M, D, T(1), emb->value.data(), D, emb->value.data(), D,
       T(0), sim.data(), M);

  T total = T(0);
  for (std::size_t q = 0; q < M; ++q) {
    T zmax = -std::numeric_limits<T>::infinity();
    for (std::size_t i = 0; i < M; ++i)
      if (i != q) zmax = std::max(zmax, sim.at2(q, i) / tau);
    T denom = T(0);
    for (std::size_t i = 0; i < M; ++i)
      if (i != q) denom += std::exp(sim.at2(q, i) / tau - zmax);
    total += -sim.at2(q, partner[q]) / tau + zmax + std::log(denom);
  }
  Tensor<T> y({1});
  y[0] = total / static_cast<T>(M);

  auto n = detail::new_op(std::move(y), {emb});
  Node<T>* self = n.get();
  n->backward_fn = [self, M, D, tau, partner, sim = std::move(sim)] {
    const Var<T>& e_in = self->inputs[0];
    if (!e_in->requires_grad) return;
    e_in->ensure_grad();
    T g = self->grad[0] / (static_cast<T>(M) * tau);
    Tensor<T> ds({M, M});
    for (std::size_t q = 0; q < M; ++q) {
      T zmax = -std::numeric_limits<T>::infinity();
      for (std::size_t i = 0; i < M; ++i)
        if (i != q) zmax = std::max(zmax, sim.at2(q, i) / tau);
      T denom = T(0);
      for (std::size_t i = 0; i < M; ++i)
        if (i != q) denom += std::exp(sim.at2(q, i) / tau - zmax);
      for (std::size_t i = 0; i < M; ++i) {
        if (i == q) continue;
        T soft = std::exp(sim.at2(q, i) / tau - zmax) / denom;
        ds.at2(q, i) = g * (soft - (i == partner[q] ? T(1) : T(0)));
      }
    }
    // S depends on E twice; symmetrize before the matmul
    Tensor<T> dsym({M, M});
    for (std::size_t r = 0; r < M; ++r)
      for (std::size_t c = 0; c < M; ++c)
        dsym.at2(r, c) = ds.at2(r, c) + ds.at2(c, r);
    gemm(false, false, M, D, M, T(1), dsym.data(), M, e_in->value.data(), D,
         T(1), e_in->grad.data(), D);
  };
  return n;
}

// Margin triplet loss on cosine similarity: mean over the triplet set of
// max(0, alpha - cos(f_i, f_j) + cos(f_i, f_k)).
template <typename T>
Var<T> fcl_loss(const Var<T>& feats,
                const std::vector<std::array<std::size_t, 3>>& triplets,
                T alpha) {
  const Shape& s = feats->value.shape();
  if (s.size() != 2) throw std::invalid_argument("fcl_loss: need 2-d");
  const std::size_t B = s[0], D = s[1];
  if (triplets.empty())
    throw std::invalid_argument("fcl_loss: empty triplet set");
  for (const auto& t : triplets)
    if (t[0] >= B || t[1] >= B || t[2] >= B)
      throw std::invalid_argument("fcl_loss: triplet index out of range");

  auto cosine = [&](std::size_t i, std::size_t j, T& na, T& nb, T& ab) {
    na = nb = ab = T(0);
    for (std::size_t c = 0; c < D; ++c) {
      na += feats->value.at2(i, c) * feats->value.at2(i, c);
      nb += feats->value.at2(j, c) * feats->value.at2(j, c);
      ab += feats->value.at2(i, c) * feats->value.at2(j, c);
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    return (na < T(kCosineNormFloor) || nb < T(kCosineNormFloor))
               ? T(0)
               : ab / (na * nb);
  };

  T total = T(0);
  for (const auto& t : triplets) {
    T na, nb, ab;
    T cij = cosine(t[0], t[1], na, nb, ab);
    T cik = cosine(t[0], t[2], na, nb, ab);
    T h = alpha - cij + cik;
    if (h > T(0)) total += h;
  }
  Tensor<T> y({1});
  y[0] = total / static_cast<T>(triplets.size());

  auto n = detail::new_op(std::move(y), {feats});
  Node<T>* self = n.get();
  n->backward_fn = [self, D, triplets, alpha] {
    const Var<T>& f_in = self->inputs[0];
    if (!f_in->requires_grad) return;
    f_in->ensure_grad();
    T g = self->grad[0] / static_cast<T>(triplets.size());
    auto cos_parts = [&](std::size_t i, std::size_t j, T& na, T& nb, T& ab) {
      na = nb = ab = T(0);
      for (std::size_t c = 0; c < D; ++c) {
        na += f_in->value.at2(i, c) * f_in->value.at2(i, c);
        nb += f_in->value.at2(j, c) * f_in->value.at2(j, c);
        ab += f_in->value.at2(i, c) * f_in->value.at2(j, c);
      }
      na = std::sqrt(na);
      nb = std::sqrt(nb);
    };
    // d cos(f_a, f_b) scattered into rows a and b with weight w
    auto add_dcos = [&](std::size_t a, std::size_t b, T w) {
      T na, nb, ab;
      cos_parts(a, b, na, nb, ab);
      if (na < T(kCosineNormFloor) || nb < T(kCosineNormFloor)) return;
      T inv = T(1) / (na * nb);
      T cab = ab * inv;
      for (std::size_t c = 0; c < D; ++c) {
        f_in->grad.at2(a, c) +=
            w * (f_in->value.at2(b, c) * inv -
                 cab * f_in->value.at2(a, c) / (na * na));
        f_in->grad.at2(b, c) +=
            w * (f_in->value.at2(a, c) * inv -
                 cab * f_in->value.at2(b, c) / (nb * nb));
      }
    };
    for (const auto& t : triplets) {
      T na, nb, ab;
      cos_parts(t[0], t[1], na, nb, ab);
      T cij = (na < T(kCosineNormFloor) || nb < T(kCosineNormFloor))
                  ? T(0)
                  : ab / (na * nb);
      cos_parts(t[0], t[2], na, nb, ab);
      T cik = (na < T(kCosineNormFloor) || nb < T(kCosineNormFloor))
                  ? T(0)
                  : ab / (na * nb);
      if (alpha - cij + cik <= T(0)) continue;
      add_dcos(t[0], t[1], -g);
      add_dcos(t[0], t[2], g);
    }
  };
  return n;
}

}  // namespace auda
