#pragma once

#include <string>
#include <vector>

#include "cin/conv.hpp"
#include "cin/dem.hpp"
#include "cin/init.hpp"

namespace cin {

// JPEG-vs-other discriminator routing between the two decoders. The FC head
// starts at zero so an untrained classifier reports probability exactly 0.5.
template <typename T>
struct NsmParams {
  std::vector<Tensor<T>> conv_w, conv_b;
  Tensor<T> fc_w, fc_b;

  NsmParams() = default;
  NsmParams(const std::vector<int>& widths, Rng& rng) {
    require(!widths.empty(), "nsm: need at least one conv layer");
    int ci = 3;
    for (size_t i = 0; i < widths.size(); ++i) {
      conv_w.push_back(init_conv_weight<T>(widths[i], ci, 3, rng,
                                           "nsm.conv" + std::to_string(i) + ".w"));
      conv_b.push_back(init_zeros<T>({widths[i]},
                                     "nsm.conv" + std::to_string(i) + ".b"));
      ci = widths[i];
    }
    fc_w = init_zeros<T>({1, ci}, "nsm.fc.w");
    fc_b = init_zeros<T>({1}, "nsm.fc.b");
  }

  // Raw logit per batch item, shape [B, 1].
  Tensor<T> logit(const Tensor<T>& img) const {
    require_shape(img.rank() == 4 && img.dim(1) == 3,
                  "nsm: expected [B,3,H,W], got " + shape_str(img.shape()));
    Tensor<T> h = img;
    for (size_t i = 0; i < conv_w.size(); ++i)
      h = relu(conv2d(h, conv_w[i], conv_b[i], 2, 1));
    h = global_avg_pool(h);
    return fully_connected(h, fc_w, fc_b);
  }

  Tensor<T> classify(const Tensor<T>& img) const { return sigmoid(logit(img)); }

  void collect(std::vector<Tensor<T>>& out) const {
    for (size_t i = 0; i < conv_w.size(); ++i) {
      out.push_back(conv_w[i]);
      out.push_back(conv_b[i]);
    }
    out.push_back(fc_w);
    out.push_back(fc_b);
  }
};

// Routes to the compression decoder's message when the classifier calls JPEG;
// a tie at the threshold resolves to the compression path.
inline BitMessage nsm_select(double p, const BitMessage& wm_im,
                             const BitMessage& wm_niam, double tau = 0.5) {
  return p >= tau ? wm_niam : wm_im;
}

}  // namespace cin
