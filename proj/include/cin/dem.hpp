#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cin/conv.hpp"
#include "cin/haar.hpp"
#include "cin/init.hpp"

namespace cin {

using BitMessage = std::vector<std::uint8_t>;

// Diffusion side: three parallel branches copy the message, lift it with an
// FC layer to a square map, and upsample with k=2/s=2 transpose convs until
// the map matches the cover extents; the concatenated branches then move to
// the Haar domain. Extraction mirrors the stack with stride-2 convs and
// separately trained weights, averaging the three branch read-outs.
template <typename T>
struct DemParams {
  struct Branch {
    Tensor<T> fc_w, fc_b;
    std::vector<Tensor<T>> conv_w, conv_b;
  };

  int msg_len;
  int msg_hidden;  // perfect square
  int image_size;
  int base;        // sqrt(msg_hidden)
  int blocks;      // log2(image_size / base)
  std::vector<Branch> diffuse_br, extract_br;

  DemParams(int L, int Lhat, int image, int width, Rng& rng) {
    msg_len = L;
    msg_hidden = Lhat;
    image_size = image;
    base = static_cast<int>(std::lround(std::sqrt(static_cast<double>(Lhat))));
    require(base * base == Lhat,
            "dem: message hidden size " + std::to_string(Lhat) +
                " is not a perfect square");
    require(image > base && (image % base) == 0,
            "dem: image size must be base * 2^n, got " + std::to_string(image));
    int ratio = image / base;
    blocks = 0;
    while (ratio > 1) {
      require(ratio % 2 == 0, "dem: image size must be base * 2^n");
      ratio /= 2;
      ++blocks;
    }

    // Channel trajectory 1 -> width -> width/2 -> ... -> 1 over `blocks` steps.
    std::vector<int> up(blocks);
    for (int i = 0; i < blocks; ++i)
      up[i] = (i == blocks - 1) ? 1 : std::max(width >> i, 2);
    std::vector<int> down(blocks);
    for (int i = 0; i < blocks; ++i)
      down[i] = (i == blocks - 1) ? 1 : up[blocks - 2 - i];

    for (int br = 0; br < 3; ++br) {
      const std::string p = "dem.diffuse" + std::to_string(br) + ".";
      Branch d;
      d.fc_w = init_fc_weight<T>(Lhat, L, rng, p + "fc.w");
      d.fc_b = init_zeros<T>({Lhat}, p + "fc.b");
      int ci = 1;
      for (int i = 0; i < blocks; ++i) {
        d.conv_w.push_back(init_convt_weight<T>(ci, up[i], rng,
                                                p + "up" + std::to_string(i) + ".w"));
        d.conv_b.push_back(init_zeros<T>({up[i]},
                                         p + "up" + std::to_string(i) + ".b"));
        ci = up[i];
      }
      diffuse_br.push_back(std::move(d));

      const std::string q = "dem.extract" + std::to_string(br) + ".";
      Branch e;
      ci = 1;
      for (int i = 0; i < blocks; ++i) {
        e.conv_w.push_back(init_conv_weight<T>(down[i], ci, 2, rng,
                                               q + "down" + std::to_string(i) + ".w"));
        e.conv_b.push_back(init_zeros<T>({down[i]},
                                         q + "down" + std::to_string(i) + ".b"));
        ci = down[i];
      }
      e.fc_w = init_fc_weight<T>(L, Lhat, rng, q + "fc.w");
      e.fc_b = init_zeros<T>({L}, q + "fc.b");
      extract_br.push_back(std::move(e));
    }
  }

  void collect(std::vector<Tensor<T>>& out) const {
    for (const auto* set : {&diffuse_br, &extract_br}) {
      for (const auto& br : *set) {
        out.push_back(br.fc_w);
        out.push_back(br.fc_b);
        for (size_t i = 0; i < br.conv_w.size(); ++i) {
          out.push_back(br.conv_w[i]);
          out.push_back(br.conv_b[i]);
        }
      }
    }
  }
};

// msgs holds raw {0,1} bits, shape [B, L]; bits are centered to +-0.5 before
// the FC layer. Output shape [B, 12, H/2, W/2].
template <typename T>
Tensor<T> dem_diffuse(const Tensor<T>& msgs, const DemParams<T>& p) {
  require_shape(msgs.rank() == 2 && msgs.dim(1) == p.msg_len,
                "dem_diffuse: message shape " + shape_str(msgs.shape()) +
                    " does not match L=" + std::to_string(p.msg_len));
  const Index B = msgs.dim(0);
  Tensor<T> centered = add_scalar(msgs, T(-0.5));
  std::vector<Tensor<T>> branches;
  for (const auto& br : p.diffuse_br) {
    Tensor<T> h = fully_connected(centered, br.fc_w, br.fc_b);
    h = reshape(h, {B, 1, p.base, p.base});
    for (size_t i = 0; i < br.conv_w.size(); ++i) {
      h = conv_transpose2d(h, br.conv_w[i], br.conv_b[i]);
      if (i + 1 < br.conv_w.size()) h = leaky_relu(h, T(0.2));
    }
    branches.push_back(std::move(h));
  }
  return haar2d(channel_concat(branches));
}

// Inverse-direction read-out producing logits trained toward raw {0,1}.
template <typename T>
Tensor<T> dem_extract(const Tensor<T>& features, const DemParams<T>& p) {
  require_shape(features.rank() == 4 && features.dim(1) == 12,
                "dem_extract: expected [B,12,H/2,W/2], got " +
                    shape_str(features.shape()));
  const Index B = features.dim(0);
  Tensor<T> img = ihaar2d(features);
  require_shape(img.dim(2) == p.image_size && img.dim(3) == p.image_size,
                "dem_extract: feature extents do not match image size " +
                    std::to_string(p.image_size));
  auto chans = channel_split(img, 3);
  Tensor<T> acc;
  for (int br = 0; br < 3; ++br) {
    Tensor<T> h = chans[br];
    const auto& e = p.extract_br[br];
    for (size_t i = 0; i < e.conv_w.size(); ++i) {
      h = conv2d(h, e.conv_w[i], e.conv_b[i], 2, 0);
      if (i + 1 < e.conv_w.size()) h = leaky_relu(h, T(0.2));
    }
    h = reshape(h, {B, static_cast<Index>(p.msg_hidden)});
    h = fully_connected(h, e.fc_w, e.fc_b);
    acc = acc.defined() ? add(acc, h) : h;
  }
  return scale(acc, T(1) / T(3));
}

// bit_i = 1 iff logit_i >= 0.5.
template <typename T>
BitMessage threshold_bits(const Tensor<T>& logits, Index row = 0) {
  require_shape(logits.rank() == 2 && row < logits.dim(0),
                "threshold_bits: bad logits shape or row");
  const Index L = logits.dim(1);
  BitMessage bits(L);
  for (Index i = 0; i < L; ++i)
    bits[i] = logits[row * L + i] >= T(0.5) ? 1 : 0;
  return bits;
}

inline double bit_error_fraction(const BitMessage& a, const BitMessage& b) {
  require(a.size() == b.size(), "bit_error_fraction: length mismatch");
  if (a.empty()) return 0.0;
  long diff = 0;
  for (size_t i = 0; i < a.size(); ++i) diff += a[i] != b[i];
  return static_cast<double>(diff) / static_cast<double>(a.size());
}

}  // namespace cin
