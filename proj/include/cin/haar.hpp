#pragma once

#include "cin/ops.hpp"

namespace cin {

namespace detail {

// Orthonormal 2x2 Haar analysis: every band is a unit-norm combination of the
// four block samples, so the transform preserves squared norm and its matrix
// transpose equals its inverse. Band order per input channel: LL, HL, LH, HH.
template <typename T>
void haar_fwd_kernel(const T* in, Index C, Index H, Index W, T* out) {
  const Index Ho = H / 2, Wo = W / 2, plane = Ho * Wo;
  for (Index c = 0; c < C; ++c) {
    const T* src = in + c * H * W;
    T* ll = out + (c * 4 + 0) * plane;
    T* hl = out + (c * 4 + 1) * plane;
    T* lh = out + (c * 4 + 2) * plane;
    T* hh = out + (c * 4 + 3) * plane;
    for (Index i = 0; i < Ho; ++i) {
      for (Index j = 0; j < Wo; ++j) {
        const T a = src[2 * i * W + 2 * j];
        const T b = src[2 * i * W + 2 * j + 1];
        const T cc = src[(2 * i + 1) * W + 2 * j];
        const T d = src[(2 * i + 1) * W + 2 * j + 1];
        const Index p = i * Wo + j;
        ll[p] = (a + b + cc + d) * T(0.5);
        hl[p] = (b - a + d - cc) * T(0.5);
        lh[p] = (cc - a + d - b) * T(0.5);
        hh[p] = (a - b - cc + d) * T(0.5);
      }
    }
  }
}

template <typename T>
void haar_inv_kernel(const T* in, Index C4, Index H, Index W, T* out) {
  const Index C = C4 / 4, plane = H * W, Ho = 2 * H, Wo = 2 * W;
  for (Index c = 0; c < C; ++c) {
    const T* ll = in + (c * 4 + 0) * plane;
    const T* hl = in + (c * 4 + 1) * plane;
    const T* lh = in + (c * 4 + 2) * plane;
    const T* hh = in + (c * 4 + 3) * plane;
    T* dst = out + c * Ho * Wo;
    for (Index i = 0; i < H; ++i) {
      for (Index j = 0; j < W; ++j) {
        const Index p = i * W + j;
        const T l = ll[p], h = hl[p], v = lh[p], x = hh[p];
        dst[2 * i * Wo + 2 * j] = (l - h - v + x) * T(0.5);
        dst[2 * i * Wo + 2 * j + 1] = (l + h - v - x) * T(0.5);
        dst[(2 * i + 1) * Wo + 2 * j] = (l - h + v - x) * T(0.5);
        dst[(2 * i + 1) * Wo + 2 * j + 1] = (l + h + v + x) * T(0.5);
      }
    }
  }
}

}  // namespace detail

// [B,C,H,W] -> [B,4C,H/2,W/2]; orthonormal, hence the adjoint is the inverse.
template <typename T>
Tensor<T> haar2d(const Tensor<T>& x) {
  detail::check_rank4("haar2d", x);
  const Index B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  require_shape(H % 2 == 0 && W % 2 == 0,
                "haar2d: extents must be even, got " + shape_str(x.shape()));
  ArrayX<T> y(x.size());
  for (Index b = 0; b < B; ++b)
    detail::haar_fwd_kernel(x.data() + b * C * H * W, C, H, W,
                            y.data() + b * C * H * W);
  return detail::make_op<T>(
      {B, 4 * C, H / 2, W / 2}, std::move(y), {x}, [B, C, H, W](Node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        ArrayX<T> g(p.value.size());
        for (Index b = 0; b < B; ++b)
          detail::haar_inv_kernel(n.grad.data() + b * C * H * W, 4 * C, H / 2,
                                  W / 2, g.data() + b * C * H * W);
        p.acc_grad(g);
      });
}

// [B,4C,H,W] -> [B,C,2H,2W]; exact inverse of haar2d.
template <typename T>
Tensor<T> ihaar2d(const Tensor<T>& x) {
  detail::check_rank4("ihaar2d", x);
  const Index B = x.dim(0), C4 = x.dim(1), H = x.dim(2), W = x.dim(3);
  require_shape(C4 % 4 == 0, "ihaar2d: channel count " + std::to_string(C4) +
                                 " is not a multiple of 4");
  ArrayX<T> y(x.size());
  for (Index b = 0; b < B; ++b)
    detail::haar_inv_kernel(x.data() + b * C4 * H * W, C4, H, W,
                            y.data() + b * C4 * H * W);
  return detail::make_op<T>(
      {B, C4 / 4, 2 * H, 2 * W}, std::move(y), {x}, [B, C4, H, W](Node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        ArrayX<T> g(p.value.size());
        for (Index b = 0; b < B; ++b)
          detail::haar_fwd_kernel(n.grad.data() + b * C4 * H * W, C4 / 4,
                                  2 * H, 2 * W, g.data() + b * C4 * H * W);
        p.acc_grad(g);
      });
}

}  // namespace cin
