#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cin/rng.hpp"
#include "cin/tensor.hpp"

namespace testsup {

// Natural-looking synthetic photo: smooth gradient base, low-frequency waves,
// soft ellipses, multi-octave value noise down to fine texture, and a few
// hard edges, giving a roughly 1/f spectrum. Values land in [0.02, 0.98] so
// attacks have headroom on both sides.
template <typename T = float>
cin::Tensor<T> synth_image(cin::Index H, cin::Index W, std::uint64_t seed) {
  cin::Rng rng(seed);
  std::vector<double> img(3 * H * W, 0.0);

  double base[3], gx[3], gy[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(0.3, 0.7);
    gx[c] = rng.uniform(-0.25, 0.25);
    gy[c] = rng.uniform(-0.25, 0.25);
  }

  struct Wave {
    double fx, fy, ph, amp;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < 3; ++i)
    waves.push_back({rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0),
                     rng.uniform(0, 6.28), rng.uniform(0.03, 0.1)});

  struct Blob {
    double cx, cy, rx, ry, amp[3];
  };
  std::vector<Blob> blobs;
  for (int i = 0; i < 4; ++i) {
    Blob b{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9),
           rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3), {}};
    for (int c = 0; c < 3; ++c) b.amp[c] = rng.uniform(-0.3, 0.3);
    blobs.push_back(b);
  }

  // Value-noise octaves: coarse structure through pixel-scale texture.
  struct Octave {
    cin::Index g;
    double amp;
    std::vector<double> grid;
  };
  std::vector<Octave> octaves;
  for (auto [g, amp] : {std::pair<cin::Index, double>{9, 0.08},
                        {17, 0.05},
                        {33, 0.035},
                        {65, 0.025}}) {
    Octave o{g, amp, std::vector<double>(3 * g * g)};
    for (auto& v : o.grid) v = rng.uniform(-1.0, 1.0);
    octaves.push_back(std::move(o));
  }

  // Hard intensity edges (jpeg stress): a few random half-plane steps.
  struct Edge {
    double nx, ny, d, amp[3];
  };
  std::vector<Edge> edges;
  for (int i = 0; i < 3; ++i) {
    const double th = rng.uniform(0, 6.28318);
    Edge e{std::cos(th), std::sin(th), rng.uniform(0.2, 0.8), {}};
    for (int c = 0; c < 3; ++c) e.amp[c] = rng.uniform(-0.12, 0.12);
    edges.push_back(e);
  }

  for (cin::Index i = 0; i < H; ++i) {
    const double y = (i + 0.5) / H;
    for (cin::Index j = 0; j < W; ++j) {
      const double x = (j + 0.5) / W;
      double wave = 0;
      for (const auto& wv : waves)
        wave += wv.amp * std::sin(6.28318 * (wv.fx * x + wv.fy * y) + wv.ph);
      for (int c = 0; c < 3; ++c) {
        double v = base[c] + gx[c] * (x - 0.5) + gy[c] * (y - 0.5) + wave;
        for (const auto& b : blobs) {
          const double dx = (x - b.cx) / b.rx, dy = (y - b.cy) / b.ry;
          v += b.amp[c] * std::exp(-(dx * dx + dy * dy));
        }
        for (size_t k = 0; k < edges.size(); ++k)
          v += edges[k].amp[c] *
               ((edges[k].nx * x + edges[k].ny * y > edges[k].d) ? 1.0 : 0.0);
        for (const auto& o : octaves) {
          const double gu = x * (o.g - 1), gv = y * (o.g - 1);
          const cin::Index u0 =
              std::min<cin::Index>(static_cast<cin::Index>(gu), o.g - 2);
          const cin::Index v0 =
              std::min<cin::Index>(static_cast<cin::Index>(gv), o.g - 2);
          const double fu = gu - u0, fv = gv - v0;
          const double* gp = o.grid.data() + c * o.g * o.g;
          v += o.amp * ((1 - fu) * (1 - fv) * gp[v0 * o.g + u0] +
                        fu * (1 - fv) * gp[v0 * o.g + u0 + 1] +
                        (1 - fu) * fv * gp[(v0 + 1) * o.g + u0] +
                        fu * fv * gp[(v0 + 1) * o.g + u0 + 1]);
        }
        img[c * H * W + i * W + j] = std::clamp(v, 0.02, 0.98);
      }
    }
  }

  cin::ArrayX<T> a(3 * H * W);
  for (cin::Index i = 0; i < a.size(); ++i) a[i] = static_cast<T>(img[i]);
  return cin::Tensor<T>::from_array({1, 3, H, W}, std::move(a), false);
}

template <typename T = float>
cin::Tensor<T> synth_batch(cin::Index B, cin::Index H, cin::Index W,
                           std::uint64_t seed) {
  cin::ArrayX<T> a(B * 3 * H * W);
  for (cin::Index b = 0; b < B; ++b) {
    auto img = synth_image<T>(H, W, seed + 1000 * b);
    a.segment(b * 3 * H * W, 3 * H * W) = img.array();
  }
  return cin::Tensor<T>::from_array({B, 3, H, W}, std::move(a), false);
}

// Random {0,1} message batch as both a tensor and raw bits.
template <typename T = float>
cin::Tensor<T> random_bits(cin::Index B, cin::Index L, cin::Rng& rng) {
  cin::ArrayX<T> a(B * L);
  for (cin::Index i = 0; i < a.size(); ++i) a[i] = rng.coin() ? T(1) : T(0);
  return cin::Tensor<T>::from_array({B, L}, std::move(a), false);
}

}  // namespace testsup
