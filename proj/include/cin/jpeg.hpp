#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "cin/dct.hpp"
#include "cin/tensor.hpp"

namespace cin {

// Baseline JPEG quantization pipeline: 8-bit quantize, BT.601 full-range
// color transform, 4:2:0 box subsampling, blockwise DCT, quality-scaled
// base-table quantization, and the inverse chain. Entropy coding is lossless
// and therefore omitted; the pixel effect is complete.
namespace jpeg {

inline const std::array<int, 64>& base_luma_table() {
  static const std::array<int, 64> t = {
      16, 11, 10, 16, 24,  40,  51,  61,   //
      12, 12, 14, 19, 26,  58,  60,  55,   //
      14, 13, 16, 24, 40,  57,  69,  56,   //
      14, 17, 22, 29, 51,  87,  80,  62,   //
      18, 22, 37, 56, 68,  109, 103, 77,   //
      24, 35, 55, 64, 81,  104, 113, 92,   //
      49, 64, 78, 87, 103, 121, 120, 101,  //
      72, 92, 95, 98, 112, 100, 103, 99};
  return t;
}

inline const std::array<int, 64>& base_chroma_table() {
  static const std::array<int, 64> t = {
      17, 18, 24, 47, 99, 99, 99, 99,  //
      18, 21, 26, 66, 99, 99, 99, 99,  //
      24, 26, 56, 99, 99, 99, 99, 99,  //
      47, 66, 99, 99, 99, 99, 99, 99,  //
      99, 99, 99, 99, 99, 99, 99, 99,  //
      99, 99, 99, 99, 99, 99, 99, 99,  //
      99, 99, 99, 99, 99, 99, 99, 99,  //
      99, 99, 99, 99, 99, 99, 99, 99};
  return t;
}

// IJG quality scaling: scale% = 5000/Q below 50, else 200 - 2Q; entries are
// rounded down with +50 bias and clamped to [1, 255]. Q = 50 reproduces the
// base tables exactly.
inline std::array<int, 64> scaled_table(const std::array<int, 64>& base,
                                        int quality) {
  require(quality >= 1 && quality <= 100,
          "jpeg: quality must be in [1,100], got " + std::to_string(quality));
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> t{};
  for (int i = 0; i < 64; ++i) {
    int v = (base[i] * scale + 50) / 100;
    t[i] = std::clamp(v, 1, 255);
  }
  return t;
}

namespace detail {

struct Plane {
  long h = 0, w = 0;
  std::vector<double> v;
  double& at(long i, long j) { return v[i * w + j]; }
  double at(long i, long j) const { return v[i * w + j]; }
};

inline Plane pad_to_multiple(const Plane& p, long m) {
  Plane out;
  out.h = (p.h + m - 1) / m * m;
  out.w = (p.w + m - 1) / m * m;
  out.v.resize(out.h * out.w);
  for (long i = 0; i < out.h; ++i) {
    const long si = std::min(i, p.h - 1);
    for (long j = 0; j < out.w; ++j)
      out.at(i, j) = p.at(si, std::min(j, p.w - 1));
  }
  return out;
}

inline void quantize_plane(Plane& p, const std::array<int, 64>& table) {
  double block[64], freq[64];
  for (long by = 0; by < p.h; by += 8) {
    for (long bx = 0; bx < p.w; bx += 8) {
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
          block[i * 8 + j] = p.at(by + i, bx + j) - 128.0;
      dct8x8(block, freq);
      for (int i = 0; i < 64; ++i) {
        const double q = static_cast<double>(table[i]);
        freq[i] = std::llround(freq[i] / q) * q;
      }
      idct8x8(freq, block);
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
          p.at(by + i, bx + j) = block[i * 8 + j] + 128.0;
    }
  }
}

}  // namespace detail

// One image plane set through the codec; img values in [0,1], shape [3,H,W].
inline void code_image(const double* rgb, long H, long W, int quality,
                       double* out) {
  using detail::Plane;
  const auto ql = scaled_table(base_luma_table(), quality);
  const auto qc = scaled_table(base_chroma_table(), quality);

  Plane y, cb, cr;
  y.h = cb.h = cr.h = H;
  y.w = cb.w = cr.w = W;
  y.v.resize(H * W);
  cb.v.resize(H * W);
  cr.v.resize(H * W);
  for (long i = 0; i < H * W; ++i) {
    // 8-bit quantization happens before the color transform.
    const double r = std::llround(std::clamp(rgb[i], 0.0, 1.0) * 255.0);
    const double g = std::llround(std::clamp(rgb[H * W + i], 0.0, 1.0) * 255.0);
    const double b = std::llround(std::clamp(rgb[2 * H * W + i], 0.0, 1.0) * 255.0);
    y.v[i] = 0.299 * r + 0.587 * g + 0.114 * b;
    cb.v[i] = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0;
    cr.v[i] = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0;
  }

  // Pad to full 16x16 MCUs so the subsampled chroma tiles into 8x8 blocks.
  Plane yp = detail::pad_to_multiple(y, 16);
  Plane cbp = detail::pad_to_multiple(cb, 16);
  Plane crp = detail::pad_to_multiple(cr, 16);

  // 4:2:0 chroma: 2x2 box average.
  auto subsample = [](const Plane& p) {
    Plane s;
    s.h = p.h / 2;
    s.w = p.w / 2;
    s.v.resize(s.h * s.w);
    for (long i = 0; i < s.h; ++i)
      for (long j = 0; j < s.w; ++j)
        s.at(i, j) = 0.25 * (p.at(2 * i, 2 * j) + p.at(2 * i, 2 * j + 1) +
                             p.at(2 * i + 1, 2 * j) + p.at(2 * i + 1, 2 * j + 1));
    return s;
  };
  Plane cbs = subsample(cbp), crs = subsample(crp);

  detail::quantize_plane(yp, ql);
  detail::quantize_plane(cbs, qc);
  detail::quantize_plane(crs, qc);

  for (long i = 0; i < H; ++i) {
    for (long j = 0; j < W; ++j) {
      const double yy = yp.at(i, j);
      const double cbv = cbs.at(i / 2, j / 2) - 128.0;  // replicate upsample
      const double crv = crs.at(i / 2, j / 2) - 128.0;
      const double r = yy + 1.402 * crv;
      const double g = yy - 0.344136 * cbv - 0.714136 * crv;
      const double b = yy + 1.772 * cbv;
      out[i * W + j] = std::clamp(r, 0.0, 255.0) / 255.0;
      out[H * W + i * W + j] = std::clamp(g, 0.0, 255.0) / 255.0;
      out[2 * H * W + i * W + j] = std::clamp(b, 0.0, 255.0) / 255.0;
    }
  }
}

}  // namespace jpeg

// Non-differentiable codec attack. The result is a fresh leaf with no graph,
// so encoder gradients through this path are exactly zero.
template <typename T>
Tensor<T> jpeg_real(const Tensor<T>& img, int quality) {
  require_shape(img.rank() == 4 && img.dim(1) == 3,
                "jpeg_real: expected [B,3,H,W], got " + shape_str(img.shape()));
  const Index B = img.dim(0), H = img.dim(2), W = img.dim(3);
  ArrayX<T> out(img.size());
  std::vector<double> in(3 * H * W), coded(3 * H * W);
  for (Index b = 0; b < B; ++b) {
    const T* src = img.data() + b * 3 * H * W;
    for (Index i = 0; i < 3 * H * W; ++i) in[i] = static_cast<double>(src[i]);
    jpeg::code_image(in.data(), H, W, quality, coded.data());
    for (Index i = 0; i < 3 * H * W; ++i)
      out[b * 3 * H * W + i] = static_cast<T>(coded[i]);
  }
  return Tensor<T>::from_array({B, 3, H, W}, std::move(out), false);
}

}  // namespace cin
