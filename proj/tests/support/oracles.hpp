#pragma once

#include <vector>

#include "cin/tensor.hpp"

namespace testsup {

// Straight six-loop cross-correlation, kept deliberately unlike the im2col
// implementation it checks.
template <typename T>
std::vector<T> naive_conv2d(const std::vector<T>& x, long B, long Ci, long H,
                            long W, const std::vector<T>& w, long Co, long k,
                            const std::vector<T>& bias, long stride, long pad) {
  const long Ho = (H + 2 * pad - k) / stride + 1;
  const long Wo = (W + 2 * pad - k) / stride + 1;
  std::vector<T> y(B * Co * Ho * Wo, T(0));
  for (long b = 0; b < B; ++b)
    for (long co = 0; co < Co; ++co)
      for (long oy = 0; oy < Ho; ++oy)
        for (long ox = 0; ox < Wo; ++ox) {
          T acc = bias[co];
          for (long ci = 0; ci < Ci; ++ci)
            for (long ky = 0; ky < k; ++ky)
              for (long kx = 0; kx < k; ++kx) {
                const long iy = oy * stride - pad + ky;
                const long ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += x[((b * Ci + ci) * H + iy) * W + ix] *
                       w[((co * Ci + ci) * k + ky) * k + kx];
              }
          y[((b * Co + co) * Ho + oy) * Wo + ox] = acc;
        }
  return y;
}

// Transpose-as-adjoint oracle: scatter every input pixel through the 2x2
// kernel, which is exactly the input-gradient of the stride-2 conv that uses
// the same weight.
template <typename T>
std::vector<T> naive_conv_transpose2d(const std::vector<T>& x, long B, long Ci,
                                      long H, long W, const std::vector<T>& w,
                                      long Co, const std::vector<T>& bias) {
  const long Ho = 2 * H, Wo = 2 * W;
  std::vector<T> y(B * Co * Ho * Wo, T(0));
  for (long b = 0; b < B; ++b)
    for (long co = 0; co < Co; ++co)
      for (long i = 0; i < Ho; ++i)
        for (long j = 0; j < Wo; ++j)
          y[((b * Co + co) * Ho + i) * Wo + j] = bias[co];
  for (long b = 0; b < B; ++b)
    for (long ci = 0; ci < Ci; ++ci)
      for (long i = 0; i < H; ++i)
        for (long j = 0; j < W; ++j) {
          const T v = x[((b * Ci + ci) * H + i) * W + j];
          for (long co = 0; co < Co; ++co)
            for (long ky = 0; ky < 2; ++ky)
              for (long kx = 0; kx < 2; ++kx)
                y[((b * Co + co) * Ho + 2 * i + ky) * Wo + 2 * j + kx] +=
                    v * w[((ci * Co + co) * 2 + ky) * 2 + kx];
        }
  return y;
}

template <typename T>
std::vector<T> naive_fc(const std::vector<T>& x, long B, long N,
                        const std::vector<T>& w, long M,
                        const std::vector<T>& bias) {
  std::vector<T> y(B * M, T(0));
  for (long b = 0; b < B; ++b)
    for (long m = 0; m < M; ++m) {
      T acc = bias[m];
      for (long n = 0; n < N; ++n) acc += x[b * N + n] * w[m * N + n];
      y[b * M + m] = acc;
    }
  return y;
}

template <typename T>
std::vector<T> to_vector(const cin::Tensor<T>& t) {
  return std::vector<T>(t.data(), t.data() + t.size());
}

template <typename T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b) {
  double m = 0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

template <typename T>
double max_abs_diff(const cin::Tensor<T>& a, const cin::Tensor<T>& b) {
  return (a.array().template cast<double>() - b.array().template cast<double>())
      .abs()
      .maxCoeff();
}

}  // namespace testsup
