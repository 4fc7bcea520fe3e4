#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cin/conv.hpp"
#include "cin/init.hpp"
#include "cin/ops.hpp"

namespace cin {

// 5-layer dense block over 12 channels: layer i consumes the concatenation of
// the block input and every previous layer output; the last layer is linear,
// maps back to 12 channels, and starts at zero so a fresh block is the zero
// map (and a fresh coupling layer the identity).
template <typename T>
struct DenseBlock {
  static constexpr int kLayers = 5;
  std::vector<Tensor<T>> w, b;
  int channels, growth;

  DenseBlock() = default;
  DenseBlock(int channels_, int growth_, Rng& rng, const std::string& prefix)
      : channels(channels_), growth(growth_) {
    int ci = channels;
    for (int i = 0; i < kLayers; ++i) {
      const bool last = i == kLayers - 1;
      const int co = last ? channels : growth;
      if (last) {
        w.push_back(init_zeros<T>({co, ci, 3, 3}, prefix + ".l4.w"));
      } else {
        w.push_back(init_conv_weight<T>(co, ci, 3, rng,
                                        prefix + ".l" + std::to_string(i) + ".w"));
      }
      b.push_back(init_zeros<T>({co}, prefix + ".l" + std::to_string(i) + ".b"));
      ci += last ? 0 : growth;
    }
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    require_shape(x.rank() == 4 && x.dim(1) == channels,
                  "dense_block: expected " + std::to_string(channels) +
                      " channels, got " + shape_str(x.shape()));
    Tensor<T> cat = x;
    for (int i = 0; i < kLayers - 1; ++i) {
      Tensor<T> h = leaky_relu(conv2d(cat, w[i], b[i], 1, 1), T(0.2));
      cat = channel_concat(cat, h);
    }
    return conv2d(cat, w[kLayers - 1], b[kLayers - 1], 1, 1);
  }

  void collect(std::vector<Tensor<T>>& out) const {
    for (int i = 0; i < kLayers; ++i) {
      out.push_back(w[i]);
      out.push_back(b[i]);
    }
  }

  // Re-randomize every layer including the last; used by invertibility tests
  // that want a non-identity map.
  void randomize(Rng& rng, T stddev) {
    for (auto& wi : w)
      for (Index i = 0; i < wi.size(); ++i)
        wi.mutable_array()[i] = static_cast<T>(rng.normal(0.0, stddev));
    for (auto& bi : b)
      for (Index i = 0; i < bi.size(); ++i)
        bi.mutable_array()[i] = static_cast<T>(rng.normal(0.0, stddev));
  }
};

// One additive/affine coupling step over the (watermark, image) stream pair.
//   image':     im + phi(wm)
//   watermark': wm * exp_clamped(rho(image')) + eta(image')
// The inverse evaluates the same subnets at the same points, so the round
// trip is algebraically exact.
template <typename T>
struct CouplingLayer {
  DenseBlock<T> phi, rho, eta;
  T alpha;

  CouplingLayer() = default;
  CouplingLayer(int channels, int growth, T alpha_, Rng& rng,
                const std::string& prefix)
      : phi(channels, growth, rng, prefix + ".phi"),
        rho(channels, growth, rng, prefix + ".rho"),
        eta(channels, growth, rng, prefix + ".eta"),
        alpha(alpha_) {}

  std::pair<Tensor<T>, Tensor<T>> forward(const Tensor<T>& wm,
                                          const Tensor<T>& im) const {
    detail::check_same_shape("coupling_forward", wm, im);
    Tensor<T> im2 = add(phi.forward(wm), im);
    Tensor<T> wm2 = add(mul(wm, exp_clamped(rho.forward(im2), alpha)),
                        eta.forward(im2));
    return {std::move(wm2), std::move(im2)};
  }

  std::pair<Tensor<T>, Tensor<T>> inverse(const Tensor<T>& wm2,
                                          const Tensor<T>& im2) const {
    detail::check_same_shape("coupling_inverse", wm2, im2);
    Tensor<T> wm = mul(sub(wm2, eta.forward(im2)),
                       exp_clamped(neg(rho.forward(im2)), alpha));
    Tensor<T> im = sub(im2, phi.forward(wm));
    return {std::move(wm), std::move(im)};
  }

  void collect(std::vector<Tensor<T>>& out) const {
    phi.collect(out);
    rho.collect(out);
    eta.collect(out);
  }

  void randomize(Rng& rng, T stddev) {
    phi.randomize(rng, stddev);
    rho.randomize(rng, stddev);
    eta.randomize(rng, stddev);
  }
};

// Stack of coupling layers. Forward packs the final streams into a 24-channel
// tensor: channels 0..11 are the image part, 12..23 the mapped watermark.
template <typename T>
struct InvertibleModule {
  std::vector<CouplingLayer<T>> layers;
  int channels = 12;

  InvertibleModule() = default;
  InvertibleModule(int n_layers, int growth, T alpha, Rng& rng) {
    require(n_layers >= 1, "invertible module needs at least one coupling layer");
    for (int l = 0; l < n_layers; ++l)
      layers.emplace_back(channels, growth, alpha, rng,
                          "inn.layer" + std::to_string(l));
  }

  Tensor<T> forward(Tensor<T> wm, Tensor<T> im) const {
    for (const auto& layer : layers) {
      auto [w2, i2] = layer.forward(wm, im);
      wm = std::move(w2);
      im = std::move(i2);
    }
    return channel_concat(im, wm);
  }

  std::pair<Tensor<T>, Tensor<T>> inverse(const Tensor<T>& psi) const {
    require_shape(psi.rank() == 4 && psi.dim(1) == 2 * channels,
                  "im_inverse: expected " + std::to_string(2 * channels) +
                      " channels, got " + shape_str(psi.shape()));
    Tensor<T> im = channel_slice(psi, 0, channels);
    Tensor<T> wm = channel_slice(psi, channels, channels);
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
      auto [w0, i0] = it->inverse(wm, im);
      wm = std::move(w0);
      im = std::move(i0);
    }
    return {std::move(wm), std::move(im)};
  }

  void collect(std::vector<Tensor<T>>& out) const {
    for (const auto& l : layers) l.collect(out);
  }

  void randomize(Rng& rng, T stddev) {
    for (auto& l : layers) l.randomize(rng, stddev);
  }
};

}  // namespace cin
