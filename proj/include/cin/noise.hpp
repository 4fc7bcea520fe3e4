#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "cin/conv.hpp"
#include "cin/dct.hpp"
#include "cin/jpeg.hpp"
#include "cin/ops.hpp"

namespace cin {

enum class NoiseKind {
  Identity,
  JpegMask,
  RealJpeg,
  Crop,
  Cropout,
  Resize,
  GaussianBlur,
  SaltPepper,
  GaussianNoise,
  Dropout,
  Brightness,
  Contrast,
  Saturation,
  Hue,
};

// One attack: kind plus a single factor whose meaning is kind-specific
// (area/probability ratio p, kernel size k, noise level sigma on the 0..255
// scale, JPEG quality Q, or jitter strength f).
struct NoiseSpec {
  NoiseKind kind = NoiseKind::Identity;
  double factor = 0.0;
};

inline const char* noise_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::Identity: return "identity";
    case NoiseKind::JpegMask: return "jpeg_mask";
    case NoiseKind::RealJpeg: return "real_jpeg";
    case NoiseKind::Crop: return "crop";
    case NoiseKind::Cropout: return "cropout";
    case NoiseKind::Resize: return "resize";
    case NoiseKind::GaussianBlur: return "gaussian_blur";
    case NoiseKind::SaltPepper: return "salt_pepper";
    case NoiseKind::GaussianNoise: return "gaussian_noise";
    case NoiseKind::Dropout: return "dropout";
    case NoiseKind::Brightness: return "brightness";
    case NoiseKind::Contrast: return "contrast";
    case NoiseKind::Saturation: return "saturation";
    case NoiseKind::Hue: return "hue";
  }
  return "?";
}

// Factors used throughout the evaluation tables.
inline double default_factor(NoiseKind k) {
  switch (k) {
    case NoiseKind::Identity: return 0.0;
    case NoiseKind::JpegMask: return 50.0;
    case NoiseKind::RealJpeg: return 50.0;
    case NoiseKind::Crop: return 0.035;
    case NoiseKind::Cropout: return 0.3;
    case NoiseKind::Resize: return 0.5;
    case NoiseKind::GaussianBlur: return 7.0;
    case NoiseKind::SaltPepper: return 0.1;
    case NoiseKind::GaussianNoise: return 25.0;
    case NoiseKind::Dropout: return 0.3;
    case NoiseKind::Brightness: return 2.0;
    case NoiseKind::Contrast: return 2.0;
    case NoiseKind::Saturation: return 2.0;
    case NoiseKind::Hue: return 0.1;
  }
  return 0.0;
}

inline NoiseSpec make_spec(NoiseKind k) { return {k, default_factor(k)}; }

inline void validate_spec(const NoiseSpec& s) {
  const double f = s.factor;
  switch (s.kind) {
    case NoiseKind::Identity:
    case NoiseKind::JpegMask:
      return;
    case NoiseKind::RealJpeg:
      require(f >= 1 && f <= 100, "real_jpeg: quality must be in [1,100]");
      return;
    case NoiseKind::Crop:
    case NoiseKind::Cropout:
    case NoiseKind::Dropout:
    case NoiseKind::SaltPepper:
    case NoiseKind::Resize:
      require(f > 0 && f <= 1, std::string(noise_name(s.kind)) +
                                   ": ratio must be in (0,1]");
      return;
    case NoiseKind::GaussianBlur:
      require(f >= 3 && static_cast<long>(f) % 2 == 1,
              "gaussian_blur: kernel must be odd and >= 3");
      return;
    case NoiseKind::GaussianNoise:
      require(f >= 0, "gaussian_noise: sigma must be >= 0");
      return;
    case NoiseKind::Brightness:
    case NoiseKind::Contrast:
    case NoiseKind::Saturation:
      require(f > 0, std::string(noise_name(s.kind)) + ": factor must be > 0");
      return;
    case NoiseKind::Hue:
      require(f >= -0.5 && f <= 0.5, "hue: factor must be in [-0.5,0.5]");
      return;
  }
}

inline bool is_compression(NoiseKind k) {
  return k == NoiseKind::JpegMask || k == NoiseKind::RealJpeg;
}

inline bool is_differentiable(NoiseKind k) { return k != NoiseKind::RealJpeg; }

inline bool parse_noise_kind(const std::string& name, NoiseKind& out) {
  const std::pair<const char*, NoiseKind> table[] = {
      {"identity", NoiseKind::Identity},
      {"jpeg_mask", NoiseKind::JpegMask},
      {"jpegmask", NoiseKind::JpegMask},
      {"real_jpeg", NoiseKind::RealJpeg},
      {"realjpeg", NoiseKind::RealJpeg},
      {"jpeg", NoiseKind::RealJpeg},
      {"crop", NoiseKind::Crop},
      {"cropout", NoiseKind::Cropout},
      {"resize", NoiseKind::Resize},
      {"gaussian_blur", NoiseKind::GaussianBlur},
      {"gausblur", NoiseKind::GaussianBlur},
      {"salt_pepper", NoiseKind::SaltPepper},
      {"saltpepper", NoiseKind::SaltPepper},
      {"gaussian_noise", NoiseKind::GaussianNoise},
      {"gausnoise", NoiseKind::GaussianNoise},
      {"dropout", NoiseKind::Dropout},
      {"brightness", NoiseKind::Brightness},
      {"contrast", NoiseKind::Contrast},
      {"saturation", NoiseKind::Saturation},
      {"hue", NoiseKind::Hue},
  };
  for (const auto& [n, k] : table)
    if (name == n) {
      out = k;
      return true;
    }
  return false;
}

// Named attack set with uniform per-mini-batch sampling.
struct NoisePool {
  std::string name;
  std::vector<NoiseSpec> specs;

  const NoiseSpec& sample(Rng& rng) const {
    require(!specs.empty(), "noise pool '" + name + "' is empty");
    return specs[rng.integer(specs.size())];
  }
};

inline NoisePool pool_by_name(const std::string& name) {
  using K = NoiseKind;
  auto mk = [](std::string n, std::vector<K> ks) {
    NoisePool p;
    p.name = std::move(n);
    for (K k : ks) p.specs.push_back(make_spec(k));
    return p;
  };
  if (name == "none" || name == "identity")
    return mk(name, {K::Identity});
  if (name == "n_pool")
    return mk(name, {K::Identity, K::JpegMask, K::RealJpeg, K::Crop,
                     K::Cropout, K::Resize, K::GaussianBlur, K::SaltPepper,
                     K::GaussianNoise, K::Dropout, K::Brightness, K::Contrast,
                     K::Saturation, K::Hue});
  if (name == "n_cj") return mk(name, {K::JpegMask, K::RealJpeg});
  if (name == "n_si")
    return mk(name, {K::Identity, K::Cropout, K::Resize, K::Saturation,
                     K::Hue, K::Dropout, K::GaussianBlur, K::SaltPepper,
                     K::GaussianNoise});
  if (name == "n_cp1")
    return mk(name, {K::Identity, K::RealJpeg, K::Dropout, K::Cropout,
                     K::Resize});
  if (name == "n_cp2")
    return mk(name, {K::Identity, K::RealJpeg, K::Crop, K::Cropout,
                     K::GaussianBlur, K::Dropout});
  throw ValueError("unknown noise pool '" + name +
                   "' (expected n_pool, n_cj, n_si, n_cp1, n_cp2, identity)");
}

namespace detail {

// Fixed 1x1 color mixing as a constant-weight convolution so gradients flow
// through the pixel inputs.
template <typename T>
Tensor<T> channel_mix(const Tensor<T>& x, const double m[3][3],
                      const double off[3]) {
  ArrayX<T> w(9), b(3);
  for (int r = 0; r < 3; ++r) {
    b[r] = static_cast<T>(off[r]);
    for (int c = 0; c < 3; ++c) w[r * 3 + c] = static_cast<T>(m[r][c]);
  }
  Tensor<T> wt = Tensor<T>::from_array({3, 3, 1, 1}, std::move(w), false);
  Tensor<T> bt = Tensor<T>::from_array({3}, std::move(b), false);
  return conv2d(x, wt, bt, 1, 0);
}

template <typename T>
Tensor<T> rgb_to_ycbcr(const Tensor<T>& x) {
  static const double m[3][3] = {{0.299, 0.587, 0.114},
                                 {-0.168736, -0.331264, 0.5},
                                 {0.5, -0.418688, -0.081312}};
  static const double off[3] = {0.0, 0.5, 0.5};
  return channel_mix(x, m, off);
}

template <typename T>
Tensor<T> ycbcr_to_rgb(const Tensor<T>& x) {
  static const double m[3][3] = {{1.0, 0.0, 1.402},
                                 {1.0, -0.344136, -0.714136},
                                 {1.0, 1.772, 0.0}};
  static const double off[3] = {-0.701, 0.529136, -0.886};
  return channel_mix(x, m, off);
}

// Grayscale with a [1,3,1,1] constant conv.
template <typename T>
Tensor<T> luminance(const Tensor<T>& x) {
  ArrayX<T> w(3);
  w[0] = T(0.299);
  w[1] = T(0.587);
  w[2] = T(0.114);
  Tensor<T> wt = Tensor<T>::from_array({1, 3, 1, 1}, std::move(w), false);
  Tensor<T> bt = Tensor<T>::zeros({1});
  return conv2d(x, wt, bt, 1, 0);
}

// Integer rectangle of area floor(p*H*W) +- 1 when such a rectangle exists;
// among all feasible (h,w) pairs one is drawn uniformly, then placed
// uniformly. The tolerance widens only if no pair fits.
struct Rect {
  Index top, left, h, w;
};

inline Rect sample_area_rect(Index H, Index W, double p, Rng& rng) {
  const long long target = static_cast<long long>(p * static_cast<double>(H * W));
  std::vector<std::pair<Index, Index>> feasible;
  for (long long tol = 1; feasible.empty(); tol *= 2) {
    for (Index h = 1; h <= H; ++h) {
      const Index w = std::clamp<Index>(
          static_cast<Index>(std::llround(static_cast<double>(target) / h)), 1, W);
      if (std::llabs(h * w - target) <= tol) feasible.push_back({h, w});
    }
  }
  const auto [h, w] = feasible[rng.integer(feasible.size())];
  const Index top = static_cast<Index>(rng.integer(H - h + 1));
  const Index left = static_cast<Index>(rng.integer(W - w + 1));
  return {top, left, h, w};
}

// Pixel mask broadcast across channels, as a constant tensor.
template <typename T>
Tensor<T> pixel_mask_tensor(const std::vector<uint8_t>& mask, Index B, Index H,
                            Index W) {
  ArrayX<T> m(B * 3 * H * W);
  for (Index b = 0; b < B; ++b)
    for (Index c = 0; c < 3; ++c)
      for (Index i = 0; i < H * W; ++i)
        m[(b * 3 + c) * H * W + i] = static_cast<T>(mask[b * H * W + i]);
  return Tensor<T>::from_array({B, 3, H, W}, std::move(m), false);
}

inline double sample_jitter(double f, Rng& rng) {
  const double lo = std::max(0.0, 2.0 - f);
  const double hi = std::max(f, lo);
  return rng.uniform(lo, hi);
}

}  // namespace detail

// Differentiable JPEG surrogate: move to YCbCr, zero every block-DCT
// coefficient outside the low-frequency corner (keep_luma for Y, keep_chroma
// for Cb/Cr), move back. Linear, idempotent, fully taped. Extents that are
// not multiples of 8 get reflect-padded and cropped back.
template <typename T>
Tensor<T> jpeg_mask(const Tensor<T>& img, int keep_luma = 5,
                    int keep_chroma = 3) {
  detail::check_rank4("jpeg_mask", img);
  require_shape(img.dim(1) == 3, "jpeg_mask: expected 3 channels, got " +
                                     shape_str(img.shape()));
  const Index H = img.dim(2), W = img.dim(3);
  const Index ph = (8 - H % 8) % 8, pw = (8 - W % 8) % 8;
  Tensor<T> x = img;
  if (ph != 0 || pw != 0) {
    // Reflect-pad generously, then take a window aligned with the original
    // top-left corner whose extents are the next multiples of 8.
    const Index pad = std::max(ph, pw);
    require_shape(pad <= H - 1 && pad <= W - 1,
                  "jpeg_mask: image " + shape_str(img.shape()) +
                      " too small to pad to a multiple of 8");
    x = crop2d(reflect_pad2d(x, pad), pad, pad, H + ph, W + pw);
  }
  Tensor<T> ycc = detail::rgb_to_ycbcr(x);
  Tensor<T> masked = block_dct_mask(ycc, {keep_luma, keep_chroma, keep_chroma});
  Tensor<T> rgb = detail::ycbcr_to_rgb(masked);
  if (ph != 0 || pw != 0) rgb = crop2d(rgb, 0, 0, H, W);
  return rgb;
}

// Apply one attack to the watermarked batch. `cover` supplies the splice
// pixels for Dropout/Cropout. Everything except RealJpeg is taped; RealJpeg
// output is a detached leaf.
template <typename T>
Tensor<T> apply_noise(const NoiseSpec& spec, const Tensor<T>& wi,
                      const Tensor<T>& cover, Rng& rng, int keep_luma = 5,
                      int keep_chroma = 3) {
  validate_spec(spec);
  detail::check_rank4("apply_noise", wi);
  detail::check_same_shape("apply_noise", wi, cover);
  const Index B = wi.dim(0), H = wi.dim(2), W = wi.dim(3);
  using K = NoiseKind;

  switch (spec.kind) {
    case K::Identity:
      return wi;

    case K::JpegMask:
      return jpeg_mask(wi, keep_luma, keep_chroma);

    case K::RealJpeg:
      return jpeg_real(wi, static_cast<int>(spec.factor));

    case K::Crop:
    case K::Cropout: {
      const auto r = detail::sample_area_rect(H, W, spec.factor, rng);
      std::vector<uint8_t> mask(B * H * W, 0);
      for (Index b = 0; b < B; ++b)
        for (Index i = r.top; i < r.top + r.h; ++i)
          for (Index j = r.left; j < r.left + r.w; ++j)
            mask[b * H * W + i * W + j] = 1;
      Tensor<T> m = detail::pixel_mask_tensor<T>(mask, B, H, W);
      Tensor<T> kept = mul(wi, m);
      if (spec.kind == K::Crop) return kept;
      Tensor<T> inv = add_scalar(neg(m), T(1));
      return add(kept, mul(cover, inv));
    }

    case K::Dropout: {
      std::vector<uint8_t> mask(B * H * W);
      for (auto& v : mask) v = rng.uniform() < spec.factor ? 0 : 1;  // 1 keeps wi
      Tensor<T> m = detail::pixel_mask_tensor<T>(mask, B, H, W);
      Tensor<T> inv = add_scalar(neg(m), T(1));
      return add(mul(wi, m), mul(cover, inv));
    }

    case K::SaltPepper: {
      std::vector<uint8_t> keep(B * H * W);
      std::vector<uint8_t> salt(B * H * W);
      for (size_t i = 0; i < keep.size(); ++i) {
        const bool hit = rng.uniform() < spec.factor;
        keep[i] = hit ? 0 : 1;
        salt[i] = hit && rng.coin() ? 1 : 0;
      }
      Tensor<T> m = detail::pixel_mask_tensor<T>(keep, B, H, W);
      Tensor<T> s = detail::pixel_mask_tensor<T>(salt, B, H, W);
      return add(mul(wi, m), s);
    }

    case K::Resize: {
      const Index h = std::max<Index>(1, static_cast<Index>(spec.factor * H));
      const Index w = std::max<Index>(1, static_cast<Index>(spec.factor * W));
      return bilinear_resize(bilinear_resize(wi, h, w), H, W);
    }

    case K::GaussianBlur: {
      const int k = static_cast<int>(spec.factor);
      const double sigma = spec.factor / 4.0;
      ArrayX<T> w3(3LL * 3 * k * k);
      w3.setZero();
      std::vector<double> g(k);
      double norm = 0;
      for (int i = 0; i < k; ++i) {
        const double d = i - (k - 1) / 2.0;
        g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        norm += g[i];
      }
      for (auto& v : g) v /= norm;
      for (int c = 0; c < 3; ++c)
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j)
            w3[((c * 3 + c) * k + i) * k + j] = static_cast<T>(g[i] * g[j]);
      Tensor<T> wt = Tensor<T>::from_array({3, 3, k, k}, std::move(w3), false);
      Tensor<T> bt = Tensor<T>::zeros({3});
      return conv2d(reflect_pad2d(wi, k / 2), wt, bt, 1, 0);
    }

    case K::GaussianNoise: {
      ArrayX<T> nz(wi.size());
      const double s = spec.factor / 255.0;
      for (Index i = 0; i < nz.size(); ++i)
        nz[i] = static_cast<T>(rng.normal(0.0, s));
      Tensor<T> noise = Tensor<T>::from_array(wi.shape(), std::move(nz), false);
      return add(wi, noise);
    }

    case K::Brightness: {
      const T f = static_cast<T>(detail::sample_jitter(spec.factor, rng));
      return scale(wi, f);
    }

    case K::Contrast: {
      const T f = static_cast<T>(detail::sample_jitter(spec.factor, rng));
      Tensor<T> gray = detail::luminance(wi);
      Tensor<T> m = reshape(global_avg_pool(gray), {B});
      return add_per_batch(scale(wi, f), scale(m, T(1) - f));
    }

    case K::Saturation: {
      const T f = static_cast<T>(detail::sample_jitter(spec.factor, rng));
      Tensor<T> gray = detail::luminance(wi);
      Tensor<T> gray3 = channel_concat<T>({gray, gray, gray});
      return add(scale(wi, f), scale(gray3, T(1) - f));
    }

    case K::Hue: {
      // Rotation of the two chroma axes in YIQ space; the turn count is drawn
      // from [-f, f]. The inverse matrix is computed exactly so a zero turn
      // is the identity.
      const double turns = rng.uniform(-spec.factor, spec.factor);
      const double th = turns * 6.283185307179586;
      Eigen::Matrix3d to_yiq;
      to_yiq << 0.299, 0.587, 0.114,  //
          0.595716, -0.274453, -0.321263,  //
          0.211456, -0.522591, 0.311135;
      Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
      rot(1, 1) = std::cos(th);
      rot(1, 2) = -std::sin(th);
      rot(2, 1) = std::sin(th);
      rot(2, 2) = std::cos(th);
      Eigen::Matrix3d m = to_yiq.inverse() * rot * to_yiq;
      double mm[3][3], off[3] = {0, 0, 0};
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) mm[r][c] = m(r, c);
      return detail::channel_mix(wi, mm, off);
    }
  }
  throw ValueError("apply_noise: unhandled noise kind");
}

// Sequential composition of several attacks over one rng stream.
template <typename T>
Tensor<T> superimpose(const std::vector<NoiseSpec>& specs, const Tensor<T>& wi,
                      const Tensor<T>& cover, Rng& rng, int keep_luma = 5,
                      int keep_chroma = 3) {
  Tensor<T> out = wi;
  for (const auto& s : specs)
    out = apply_noise(s, out, cover, rng, keep_luma, keep_chroma);
  return out;
}

}  // namespace cin
