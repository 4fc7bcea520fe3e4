#pragma once

#include <array>
#include <cmath>

#include "cin/ops.hpp"

namespace cin {

// Orthonormal 8-point DCT-II basis; A[u][x] = c_u * cos((2x+1) u pi / 16)
// with c_0 = sqrt(1/8) and c_u = 1/2 otherwise. A constant block c transforms
// to a lone DC coefficient of 8c.
inline const std::array<std::array<double, 8>, 8>& dct8_basis() {
  static const auto A = [] {
    std::array<std::array<double, 8>, 8> a{};
    const double pi = 3.14159265358979323846;
    for (int u = 0; u < 8; ++u) {
      const double cu = u == 0 ? std::sqrt(1.0 / 8.0) : 0.5;
      for (int x = 0; x < 8; ++x)
        a[u][x] = cu * std::cos((2.0 * x + 1.0) * u * pi / 16.0);
    }
    return a;
  }();
  return A;
}

// F = A * X * A^T on one 8x8 block (row-major).
template <typename T>
void dct8x8(const T* in, T* out) {
  const auto& A = dct8_basis();
  double tmp[8][8];
  for (int u = 0; u < 8; ++u)
    for (int x = 0; x < 8; ++x) {
      double s = 0;
      for (int y = 0; y < 8; ++y) s += A[u][y] * static_cast<double>(in[y * 8 + x]);
      tmp[u][x] = s;
    }
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      double s = 0;
      for (int x = 0; x < 8; ++x) s += tmp[u][x] * A[v][x];
      out[u * 8 + v] = static_cast<T>(s);
    }
}

// X = A^T * F * A.
template <typename T>
void idct8x8(const T* in, T* out) {
  const auto& A = dct8_basis();
  double tmp[8][8];
  for (int y = 0; y < 8; ++y)
    for (int v = 0; v < 8; ++v) {
      double s = 0;
      for (int u = 0; u < 8; ++u) s += A[u][y] * static_cast<double>(in[u * 8 + v]);
      tmp[y][v] = s;
    }
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      double s = 0;
      for (int v = 0; v < 8; ++v) s += tmp[y][v] * A[v][x];
      out[y * 8 + x] = static_cast<T>(s);
    }
}

namespace detail {

// Per-channel blockwise low-pass projection: DCT, zero everything outside the
// top-left keep x keep corner, inverse DCT. Orthonormal transform plus a
// diagonal mask makes the map self-adjoint.
template <typename T>
void block_dct_mask_kernel(const T* in, Index H, Index W, int keep, T* out) {
  T block[64], freq[64];
  for (Index by = 0; by < H; by += 8) {
    for (Index bx = 0; bx < W; bx += 8) {
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
          block[i * 8 + j] = in[(by + i) * W + bx + j];
      dct8x8(block, freq);
      for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v)
          if (u >= keep || v >= keep) freq[u * 8 + v] = T(0);
      idct8x8(freq, block);
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
          out[(by + i) * W + bx + j] = block[i * 8 + j];
    }
  }
}

}  // namespace detail

// Keep only low-frequency block-DCT coefficients per channel; keep[c] gives
// the retained square per channel. Extents must be multiples of 8.
template <typename T>
Tensor<T> block_dct_mask(const Tensor<T>& x, const std::vector<int>& keep) {
  detail::check_rank4("block_dct_mask", x);
  const Index B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  require_shape(H % 8 == 0 && W % 8 == 0,
                "block_dct_mask: extents must be multiples of 8, got " +
                    shape_str(x.shape()));
  require(static_cast<Index>(keep.size()) == C,
          "block_dct_mask: need one keep size per channel");
  for (int k : keep) require(k >= 1 && k <= 8, "block_dct_mask: keep must be in [1,8]");

  ArrayX<T> y(x.size());
  const Index plane = H * W;
  for (Index b = 0; b < B; ++b)
    for (Index c = 0; c < C; ++c)
      detail::block_dct_mask_kernel(x.data() + (b * C + c) * plane, H, W,
                                    keep[c], y.data() + (b * C + c) * plane);
  return detail::make_op<T>(
      x.shape(), std::move(y), {x}, [B, C, H, W, plane, keep](Node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        ArrayX<T> g(p.value.size());
        for (Index b = 0; b < B; ++b)
          for (Index c = 0; c < C; ++c)
            detail::block_dct_mask_kernel(n.grad.data() + (b * C + c) * plane,
                                          H, W, keep[c],
                                          g.data() + (b * C + c) * plane);
        p.acc_grad(g);
      });
}

}  // namespace cin
