#pragma once

#include "cin/haar.hpp"
#include "cin/ops.hpp"

namespace cin {

// Haar-domain fusion: the mapped watermark (the second half of the invertible
// module's output) is scaled by the strength factor and added onto the
// cover's Haar bands. No clamping here; export-time quantization is the
// caller's concern so gradients stay intact.
template <typename T>
Tensor<T> fsm_fuse(const Tensor<T>& psi_wm, const Tensor<T>& cover, T strength) {
  require(strength >= T(0), "fsm_fuse: strength must be non-negative");
  detail::check_rank4("fsm_fuse cover", cover);
  Tensor<T> bands = haar2d(cover);
  detail::check_same_shape("fsm_fuse", psi_wm, bands);
  return ihaar2d(add(scale(psi_wm, strength), bands));
}

// Inverse-direction input: the watermarked (possibly attacked) image moves to
// the Haar domain and is duplicated into both coupling streams.
template <typename T>
Tensor<T> fsm_prepare_inverse(const Tensor<T>& wi) {
  Tensor<T> bands = haar2d(wi);
  return channel_concat(bands, bands);
}

// Channel-average fusion used by the invertible-only baseline configuration:
// the two 12-channel halves are averaged and synthesized back to an image.
template <typename T>
Tensor<T> fsm_fuse_baseline(const Tensor<T>& psi) {
  require_shape(psi.rank() == 4 && psi.dim(1) % 2 == 0,
                "fsm_fuse_baseline: expected an even channel count, got " +
                    shape_str(psi.shape()));
  const Index half = psi.dim(1) / 2;
  Tensor<T> a = channel_slice(psi, 0, half);
  Tensor<T> b = channel_slice(psi, half, half);
  return ihaar2d(scale(add(a, b), T(0.5)));
}

}  // namespace cin
