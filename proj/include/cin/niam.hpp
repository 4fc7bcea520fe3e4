#pragma once

#include <string>
#include <vector>

#include "cin/conv.hpp"
#include "cin/init.hpp"

namespace cin {

// Squeeze-and-excitation residual block: the excitation path squeezes the
// input to per-channel statistics, bottlenecks them by `reduction`, and
// produces sigmoid weights that rescale the conv path before the residual add.
template <typename T>
struct SeBlock {
  Tensor<T> conv1_w, conv1_b, conv2_w, conv2_b;
  Tensor<T> fc1_w, fc1_b, fc2_w, fc2_b;
  int channels;

  SeBlock() = default;
  SeBlock(int channels_, int reduction, Rng& rng, const std::string& prefix)
      : channels(channels_) {
    require(channels_ % reduction == 0,
            "se_block: channels " + std::to_string(channels_) +
                " not divisible by reduction " + std::to_string(reduction));
    const int mid = channels_ / reduction;
    conv1_w = init_conv_weight<T>(channels_, channels_, 3, rng, prefix + ".conv1.w");
    conv1_b = init_zeros<T>({channels_}, prefix + ".conv1.b");
    conv2_w = init_conv_weight<T>(channels_, channels_, 3, rng, prefix + ".conv2.w");
    conv2_b = init_zeros<T>({channels_}, prefix + ".conv2.b");
    fc1_w = init_fc_weight<T>(mid, channels_, rng, prefix + ".fc1.w");
    fc1_b = init_zeros<T>({mid}, prefix + ".fc1.b");
    fc2_w = init_fc_weight<T>(channels_, mid, rng, prefix + ".fc2.w");
    fc2_b = init_zeros<T>({channels_}, prefix + ".fc2.b");
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    Tensor<T> h = leaky_relu(conv2d(x, conv1_w, conv1_b, 1, 1), T(0.2));
    h = conv2d(h, conv2_w, conv2_b, 1, 1);
    Tensor<T> s = global_avg_pool(x);
    s = sigmoid(fully_connected(relu(fully_connected(s, fc1_w, fc1_b)),
                                fc2_w, fc2_b));
    return add(x, mul_channelwise(h, s));
  }

  void collect(std::vector<Tensor<T>>& out) const {
    out.insert(out.end(), {conv1_w, conv1_b, conv2_w, conv2_b, fc1_w, fc1_b,
                           fc2_w, fc2_b});
  }
};

// Non-invertible decoder: conv stem, SE residual stack, stride-2 pyramid,
// global pooling, FC head to message logits.
template <typename T>
struct NiamParams {
  Tensor<T> stem_w, stem_b;
  std::vector<SeBlock<T>> se;
  std::vector<Tensor<T>> down_w, down_b;
  Tensor<T> fc_w, fc_b;
  int msg_len;

  NiamParams() = default;
  NiamParams(int L, int stem, int se_blocks, int reduction,
             const std::vector<int>& down, Rng& rng)
      : msg_len(L) {
    require(!down.empty(), "niam: need at least one downsampling conv");
    stem_w = init_conv_weight<T>(stem, 3, 3, rng, "niam.stem.w");
    stem_b = init_zeros<T>({stem}, "niam.stem.b");
    for (int i = 0; i < se_blocks; ++i)
      se.emplace_back(stem, reduction, rng, "niam.se" + std::to_string(i));
    int ci = stem;
    for (size_t i = 0; i < down.size(); ++i) {
      down_w.push_back(init_conv_weight<T>(down[i], ci, 3, rng,
                                           "niam.down" + std::to_string(i) + ".w"));
      down_b.push_back(init_zeros<T>({down[i]},
                                     "niam.down" + std::to_string(i) + ".b"));
      ci = down[i];
    }
    fc_w = init_fc_weight<T>(L, ci, rng, "niam.fc.w");
    fc_b = init_zeros<T>({L}, "niam.fc.b");
  }

  Tensor<T> forward(const Tensor<T>& img) const {
    require_shape(img.rank() == 4 && img.dim(1) == 3,
                  "niam_decode: expected [B,3,H,W], got " + shape_str(img.shape()));
    Tensor<T> h = leaky_relu(conv2d(img, stem_w, stem_b, 1, 1), T(0.2));
    for (const auto& blk : se) h = blk.forward(h);
    for (size_t i = 0; i < down_w.size(); ++i)
      h = leaky_relu(conv2d(h, down_w[i], down_b[i], 2, 1), T(0.2));
    h = global_avg_pool(h);
    return fully_connected(h, fc_w, fc_b);
  }

  void collect(std::vector<Tensor<T>>& out) const {
    out.push_back(stem_w);
    out.push_back(stem_b);
    for (const auto& blk : se) blk.collect(out);
    for (size_t i = 0; i < down_w.size(); ++i) {
      out.push_back(down_w[i]);
      out.push_back(down_b[i]);
    }
    out.push_back(fc_w);
    out.push_back(fc_b);
  }
};

}  // namespace cin
