#pragma once
// Spatial graph ops: convolution, nearest upsampling, pooling, broadcast.
// Convolution lowers to im2col + GEMM, processing the batch in chunks so the
// column buffer stays bounded; backward rebuilds the columns per chunk
// instead of caching them across the step.

#include <cstring>
#include <vector>

#include "auda/graph.hpp"

namespace auda {

namespace detail {

// Column buffer layout: K rows (= Cin*kh*kw), chunk*P columns where P=Ho*Wo.
// Image j of the chunk occupies columns [j*P, (j+1)*P).
template <typename T>
void im2col_chunk(const T* x, std::size_t cin, std::size_t h, std::size_t w,
                  std::size_t kh, std::size_t kw, std::size_t stride,
                  std::size_t pad, std::size_t ho, std::size_t wo,
                  std::size_t chunk, std::vector<T>& cols) {
  const std::size_t p = ho * wo;
  const std::size_t ncols = chunk * p;
  cols.assign(static_cast<std::size_t>(cin * kh * kw) * ncols, T(0));
  for (std::size_t j = 0; j < chunk; ++j) {
    const T* img = x + j * cin * h * w;
    for (std::size_t c = 0; c < cin; ++c) {
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          T* row = cols.data() + ((c * kh + ky) * kw + kx) * ncols + j * p;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            std::ptrdiff_t iy =
                static_cast<std::ptrdiff_t>(oy * stride + ky) -
                static_cast<std::ptrdiff_t>(pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            const T* src = img + (c * h + iy) * w;
            for (std::size_t ox = 0; ox < wo; ++ox) {
              std::ptrdiff_t ix =
                  static_cast<std::ptrdiff_t>(ox * stride + kx) -
                  static_cast<std::ptrdiff_t>(pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              row[oy * wo + ox] = src[ix];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_chunk(const std::vector<T>& cols, std::size_t cin, std::size_t h,
                  std::size_t w, std::size_t kh, std::size_t kw,
                  std::size_t stride, std::size_t pad, std::size_t ho,
                  std::size_t wo, std::size_t chunk, T* dx) {
  const std::size_t p = ho * wo;
  const std::size_t ncols = chunk * p;
  for (std::size_t j = 0; j < chunk; ++j) {
    T* img = dx + j * cin * h * w;
    for (std::size_t c = 0; c < cin; ++c) {
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const T* row =
              cols.data() + ((c * kh + ky) * kw + kx) * ncols + j * p;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            std::ptrdiff_t iy =
                static_cast<std::ptrdiff_t>(oy * stride + ky) -
                static_cast<std::ptrdiff_t>(pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            T* dst = img + (c * h + iy) * w;
            for (std::size_t ox = 0; ox < wo; ++ox) {
              std::ptrdiff_t ix =
                  static_cast<std::ptrdiff_t>(ox * stride + kx) -
                  static_cast<std::ptrdiff_t>(pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              dst[ix] += row[oy * wo + ox];
            }
          }
        }
      }
    }
  }
}

// Column-buffer element budget per chunk; mutable so tests can force the
// multi-chunk path on small inputs.
inline std::size_t& conv_col_budget() {
  static std::size_t budget = 4u << 20;
  return budget;
}

inline std::size_t conv_chunk_images(std::size_t batch, std::size_t k,
                                     std::size_t p) {
  std::size_t c = conv_col_budget() / (k * p);
  if (c == 0) c = 1;
  return std::min(c, batch);
}

}  // namespace detail

// x [B,Cin,H,W] * w [Cout,Cin,kh,kw] + b [Cout] -> [B,Cout,Ho,Wo]
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b,
              std::size_t stride, std::size_t pad) {
  const Shape& sx = x->value.shape();
  const Shape& sw = w->value.shape();
  if (sx.size() != 4 || sw.size() != 4)
    throw std::invalid_argument("conv2d: expected 4-d input and weight, got " +
                                shape_str(sx) + " and " + shape_str(sw));
  if (sx[1] != sw[1])
    throw std::invalid_argument("conv2d: channel mismatch " + shape_str(sx) +
                                " vs " + shape_str(sw));
  const std::size_t B = sx[0], cin = sx[1], h = sx[2], wdt = sx[3];
  const std::size_t cout = sw[0], kh = sw[2], kw = sw[3];
  if (b->value.numel() != cout)
    throw std::invalid_argument("conv2d: bias size mismatch");
  if (h + 2 * pad < kh || wdt + 2 * pad < kw)
    throw std::invalid_argument("conv2d: kernel larger than padded input");
  const std::size_t ho = (h + 2 * pad - kh) / stride + 1;
  const std::size_t wo = (wdt + 2 * pad - kw) / stride + 1;
  const std::size_t K = cin * kh * kw, P = ho * wo;
  const std::size_t chunk_n = detail::conv_chunk_images(B, K, P);

  Tensor<T> y({B, cout, ho, wo});
  {
    std::vector<T> cols;
    std::vector<T> ybuf;
    for (std::size_t i0 = 0; i0 < B; i0 += chunk_n) {
      const std::size_t c = std::min(chunk_n, B - i0);
      detail::im2col_chunk(x->value.data() + i0 * cin * h * wdt, cin, h, wdt,
                           kh, kw, stride, pad, ho, wo, c, cols);
      ybuf.assign(cout * c * P, T(0));
      gemm(false, false, cout, c * P, K, T(1), w->value.data(), K, cols.data(),
           c * P, T(0), ybuf.data(), c * P);
      for (std::size_t j = 0; j < c; ++j)
        for (std::size_t co = 0; co < cout; ++co) {
          T* dst = y.data() + ((i0 + j) * cout + co) * P;
          const T* src = ybuf.data() + co * c * P + j * P;
          T bias = b->value[co];
          for (std::size_t q = 0; q < P; ++q) dst[q] = src[q] + bias;
        }
    }
  }

  auto n = detail::new_op(std::move(y), {x, w, b});
  Node<T>* self = n.get();
  n->backward_fn = [self, B, cin, h, wdt, cout, kh, kw, stride, pad, ho, wo, K,
                    P, chunk_n] {
    const Var<T>& x_in = self->inputs[0];
    const Var<T>& w_in = self->inputs[1];
    const Var<T>& b_in = self->inputs[2];
    if (x_in->requires_grad) x_in->ensure_grad();
    if (w_in->requires_grad) w_in->ensure_grad();
    if (b_in->requires_grad) {
      b_in->ensure_grad();
      for (std::size_t i = 0; i < B; ++i)
        for (std::size_t co = 0; co < cout; ++co) {
          const T* g = self->grad.data() + (i * cout + co) * P;
          T acc = T(0);
          for (std::size_t q = 0; q < P; ++q) acc += g[q];
          b_in->grad[co] += acc;
        }
    }
    if (!x_in->requires_grad && !w_in->requires_grad) return;
    std::vector<T> cols, gbuf, dcols;
    for (std::size_t i0 = 0; i0 < B; i0 += chunk_n) {
      const std::size_t c = std::min(chunk_n, B - i0);
      // gradient of this chunk in [cout, c*P] layout
      gbuf.resize(cout * c * P);
      for (std::size_t j = 0; j < c; ++j)
        for (std::size_t co = 0; co < cout; ++co)
          std::memcpy(gbuf.data() + co * c * P + j * P,
                      self->grad.data() + ((i0 + j) * cout + co) * P,
                      P * sizeof(T));
      if (w_in->requires_grad) {
        detail::im2col_chunk(x_in->value.data() + i0 * cin * h * wdt, cin, h,
                             wdt, kh, kw, stride, pad, ho, wo, c, cols);
        gemm(false, true, cout, K, c * P, T(1), gbuf.data(), c * P,
             cols.data(), c * P, T(1), w_in->grad.data(), K);
      }
      if (x_in->requires_grad) {
        dcols.assign(K * c * P, T(0));
        gemm(true, false, K, c * P, cout, T(1), w_in->value.data(), K,
             gbuf.data(), c * P, T(0), dcols.data(), c * P);
        detail::col2im_chunk(dcols, cin, h, wdt, kh, kw, stride, pad, ho, wo,
                             c, x_in->grad.data() + i0 * cin * h * wdt);
      }
    }
  };
  return n;
}

template <typename T>
Var<T> upsample_nearest2(const Var<T>& x) {
  const Shape& s = x->value.shape();
  if (s.size() != 4) throw std::invalid_argument("upsample: expected 4-d");
  const std::size_t B = s[0], C = s[1], H = s[2], W = s[3];
  Tensor<T> y({B, C, 2 * H, 2 * W});
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    const T* src = x->value.data() + bc * H * W;
    T* dst = y.data() + bc * 4 * H * W;
    for (std::size_t r = 0; r < H; ++r)
      for (std::size_t col = 0; col < W; ++col) {
        T v = src[r * W + col];
        dst[(2 * r) * 2 * W + 2 * col] = v;
        dst[(2 * r) * 2 * W + 2 * col + 1] = v;
        dst[(2 * r + 1) * 2 * W + 2 * col] = v;
        dst[(2 * r + 1) * 2 * W + 2 * col + 1] = v;
      }
  }
  auto n = detail::new_op(std::move(y), {x});
  Node<T>* self = n.get();
  n->backward_fn = [self, B, C, H, W] {
    const Var<T>& x_in = self->inputs[0];
    if (!x_in->requires_grad) return;
    x_in->ensure_grad();
    for (std::size_t bc = 0; bc < B * C; ++bc) {
      T* dst = x_in->grad.data() + bc * H * W;
      const T* g = self->grad.data() + bc * 4 * H * W;
      for (std::size_t r = 0; r < H; ++r)
        for (std::size_t col = 0; col < W; ++col)
          dst[r * W + col] += g[(2 * r) * 2 * W + 2 * col] +
                              g[(2 * r) * 2 * W + 2 * col + 1] +
                              g[(2 * r + 1) * 2 * W + 2 * col] +
                              g[(2 * r + 1) * 2 * W + 2 * col + 1];
    }
  };
  return n;
}

// [B,C,H,W] -> [B,C]
template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  const Shape& s = x->value.shape();
  if (s.size() != 4) throw std::invalid_argument("gap: expected 4-d");
  const std::size_t B = s[0], C = s[1], hw = s[2] * s[3];
  Tensor<T> y({B, C});
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    const T* src = x->value.data() + bc * hw;
    T acc = T(0);
    for (std::size_t q = 0; q < hw; ++q) acc += src[q];
    y[bc] = acc / static_cast<T>(hw);
  }
  auto n = detail::new_op(std::move(y), {x});
  Node<T>* self = n.get();
  n->backward_fn = [self, B, C, hw] {
    const Var<T>& x_in = self->inputs[0];
    if (!x_in->requires_grad) return;
    x_in->ensure_grad();
    for (std::size_t bc = 0; bc < B * C; ++bc) {
      T g = self->grad[bc] / static_cast<T>(hw);
      T* dst = x_in->grad.data() + bc * hw;
      for (std::size_t q = 0; q < hw; ++q) dst[q] += g;
    }
  };
  return n;
}

// [B,C] -> [B,C,H,W], each channel value tiled over the plane
template <typename T>
Var<T> broadcast_to_map(const Var<T>& v, std::size_t H, std::size_t W) {
  const Shape& s = v->value.shape();
  if (s.size() != 2) throw std::invalid_argument("broadcast: expected 2-d");
  const std::size_t B = s[0], C = s[1], hw = H * W;
  Tensor<T> y({B, C, H, W});
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    T val = v->value[bc];
    T* dst = y.data() + bc * hw;
    for (std::size_t q = 0; q < hw; ++q) dst[q] = val;
  }
  auto n = detail::new_op(std::move(y), {v});
  Node<T>* self = n.get();
  n->backward_fn = [self, B, C, hw] {
    const Var<T>& v_in = self->inputs[0];
    if (!v_in->requires_grad) return;
    v_in->ensure_grad();
    for (std::size_t bc = 0; bc < B * C; ++bc) {
      const T* g = self->grad.data() + bc * hw;
      T acc = T(0);
      for (std::size_t q = 0; q < hw; ++q) acc += g[q];
      v_in->grad[bc] += acc;
    }
  };
  return n;
}

}  // namespace auda
