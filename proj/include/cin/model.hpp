#pragma once

#include <utility>
#include <vector>

#include "cin/dem.hpp"
#include "cin/fsm.hpp"
#include "cin/inn.hpp"
#include "cin/niam.hpp"
#include "cin/nsm.hpp"

namespace cin {

// Architecture hyperparameters. These travel inside checkpoints so a saved
// model reconstructs itself without external configuration.
struct ModelConfig {
  int image_size = 128;
  int msg_len = 30;
  int msg_hidden = 256;  // perfect square; FC lift per diffusion branch
  int dem_width = 64;    // widest transpose-conv block, halves per block
  int inn_layers = 8;
  int inn_growth = 32;
  float exp_alpha = 2.0f;
  float strength = 1.0f;
  int jpeg_keep_luma = 5;
  int jpeg_keep_chroma = 3;
  int niam_stem = 64;
  int niam_se_blocks = 4;
  int niam_reduction = 16;
  std::vector<int> niam_down = {128, 256, 256};
  std::vector<int> nsm_widths = {32, 64, 128};

  bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct EmbedResult {
  Tensor<T> watermarked;  // unclamped
  Tensor<T> psi;          // full 24-channel invertible-module output
};

template <typename T>
struct ImDecodeResult {
  Tensor<T> logits;          // [B, L]
  Tensor<T> restored_image;  // [B, 3, H, W]
};

// The full watermarking model: diffusion/extraction, invertible stack,
// strength-scaled Haar fusion, the parallel compression decoder, and the
// routing classifier.
template <typename T>
class CinModel {
 public:
  CinModel(ModelConfig cfg, Rng& rng)
      : cfg_(cfg),
        dem_(cfg.msg_len, cfg.msg_hidden, cfg.image_size, cfg.dem_width, rng),
        inn_(cfg.inn_layers, cfg.inn_growth, static_cast<T>(cfg.exp_alpha), rng),
        niam_(cfg.msg_len, cfg.niam_stem, cfg.niam_se_blocks,
              cfg.niam_reduction, cfg.niam_down, rng),
        nsm_(cfg.nsm_widths, rng) {}

  CinModel(ModelConfig cfg, std::uint64_t seed) : CinModel(cfg, *mk_rng(seed)) {}

  const ModelConfig& config() const { return cfg_; }
  ModelConfig& config() { return cfg_; }

  EmbedResult<T> embed(const Tensor<T>& cover, const Tensor<T>& msgs,
                       T strength) const {
    require_shape(cover.rank() == 4 && cover.dim(1) == 3 &&
                      cover.dim(2) == cfg_.image_size &&
                      cover.dim(3) == cfg_.image_size,
                  "embed: cover shape " + shape_str(cover.shape()) +
                      " does not match model image size " +
                      std::to_string(cfg_.image_size));
    Tensor<T> features = dem_diffuse(msgs, dem_);
    Tensor<T> image_bands = haar2d(cover);
    Tensor<T> psi = inn_.forward(features, image_bands);
    Tensor<T> psi_wm = channel_slice(psi, 12, 12);
    Tensor<T> wi = fsm_fuse(psi_wm, cover, strength);
    return {std::move(wi), std::move(psi)};
  }

  EmbedResult<T> embed(const Tensor<T>& cover, const Tensor<T>& msgs) const {
    return embed(cover, msgs, static_cast<T>(cfg_.strength));
  }

  // Invertible-path decode from a (possibly attacked) watermarked image.
  ImDecodeResult<T> decode_im(const Tensor<T>& img) const {
    Tensor<T> psi_hat = fsm_prepare_inverse(img);
    auto [wm0, im0] = inn_.inverse(psi_hat);
    Tensor<T> logits = dem_extract(wm0, dem_);
    return {std::move(logits), ihaar2d(im0)};
  }

  Tensor<T> decode_niam(const Tensor<T>& img) const { return niam_.forward(img); }

  Tensor<T> nsm_logit(const Tensor<T>& img) const { return nsm_.logit(img); }
  Tensor<T> nsm_prob(const Tensor<T>& img) const { return nsm_.classify(img); }

  // Parameter groups; the encoder group covers everything the invertible path
  // trains (diffusion, extraction, coupling subnets).
  std::vector<Tensor<T>> encoder_params() const {
    std::vector<Tensor<T>> out;
    dem_.collect(out);
    inn_.collect(out);
    return out;
  }
  std::vector<Tensor<T>> niam_params() const {
    std::vector<Tensor<T>> out;
    niam_.collect(out);
    return out;
  }
  std::vector<Tensor<T>> nsm_params() const {
    std::vector<Tensor<T>> out;
    nsm_.collect(out);
    return out;
  }
  std::vector<Tensor<T>> all_params() const {
    std::vector<Tensor<T>> out = encoder_params();
    niam_.collect(out);
    nsm_.collect(out);
    return out;
  }

  void freeze() {
    for (auto& p : all_params()) p.set_requires_grad(false);
  }

  const DemParams<T>& dem() const { return dem_; }
  const InvertibleModule<T>& inn() const { return inn_; }
  InvertibleModule<T>& inn() { return inn_; }
  const NiamParams<T>& niam() const { return niam_; }
  const NsmParams<T>& nsm() const { return nsm_; }

 private:
  static std::unique_ptr<Rng> mk_rng(std::uint64_t seed) {
    return std::make_unique<Rng>(seed);
  }

  ModelConfig cfg_;
  DemParams<T> dem_;
  InvertibleModule<T> inn_;
  NiamParams<T> niam_;
  NsmParams<T> nsm_;
};

}  // namespace cin
