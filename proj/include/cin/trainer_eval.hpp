#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cin/dataset.hpp"
#include "cin/metrics.hpp"
#include "cin/model.hpp"
#include "cin/noise.hpp"
#include "cin/parallel.hpp"

namespace cin {

inline TensorF random_messages(Index batch, Index msg_len, Rng& rng) {
  ArrayX<float> a(batch * msg_len);
  for (Index i = 0; i < a.size(); ++i) a[i] = rng.coin() ? 1.0f : 0.0f;
  return TensorF::from_array({batch, msg_len}, std::move(a), false);
}

struct PerImageEval {
  int noise_idx = 0;
  int image_idx = 0;
  double psnr1 = 0, psnr2 = 0, ssim1 = 0;
  double nsm_p = 0;
  BitMessage embedded, bits_im, bits_niam, bits_routed;
};

struct EvalResult {
  MetricReport report;
  std::vector<PerImageEval> per_image;
};

// Per-noise evaluation over a dataset. Every image gets its own seeded
// message and noise stream, so results are reproducible and independent of
// the worker count (merging is by input order).
inline EvalResult evaluate_model(const CinModel<float>& model, const Dataset& ds,
                                 const NoisePool& pool, std::uint64_t seed,
                                 float strength) {
  EvalResult res;
  const Index n_img = ds.count();
  const int n_noise = static_cast<int>(pool.specs.size());
  res.per_image.resize(static_cast<size_t>(n_noise) * n_img);

  for (int s = 0; s < n_noise; ++s) {
    const NoiseSpec& spec = pool.specs[s];
    parallel_for(n_img, [&](Index i) {
      Rng rng(seed ^ (0x9e3779b97f4a7c15ull * (s * 100003 + i + 1)));
      PerImageEval rec;
      rec.noise_idx = s;
      rec.image_idx = static_cast<int>(i);
      TensorF cover = ds.images[i];
      TensorF msgs = random_messages(1, model.config().msg_len, rng);
      rec.embedded = threshold_bits(msgs);

      auto emb = model.embed(cover, msgs, strength);
      rec.psnr1 = psnr(cover, emb.watermarked);
      rec.ssim1 = ssim(cover, emb.watermarked);

      TensorF noised = apply_noise(spec, emb.watermarked, cover, rng,
                                   model.config().jpeg_keep_luma,
                                   model.config().jpeg_keep_chroma);
      rec.psnr2 = spec.kind == NoiseKind::Identity
                      ? std::nan("")
                      : psnr(emb.watermarked, noised);

      rec.bits_im = threshold_bits(model.decode_im(noised).logits);
      rec.bits_niam = threshold_bits(model.decode_niam(noised));
      rec.nsm_p = model.nsm_prob(noised)[0];
      rec.bits_routed = nsm_select(rec.nsm_p, rec.bits_im, rec.bits_niam);
      res.per_image[static_cast<size_t>(s) * n_img + i] = std::move(rec);
    });
  }

  for (int s = 0; s < n_noise; ++s) {
    const NoiseSpec& spec = pool.specs[s];
    MetricRow row;
    row.noise = noise_name(spec.kind);
    row.factor = spec.factor;
    double p2 = 0;
    for (Index i = 0; i < n_img; ++i) {
      const auto& rec = res.per_image[static_cast<size_t>(s) * n_img + i];
      row.psnr1 += rec.psnr1;
      row.ssim1 += rec.ssim1;
      if (spec.kind != NoiseKind::Identity) p2 += rec.psnr2;
      row.acc_im += acc_percent(rec.bits_im, rec.embedded);
      row.acc_niam += acc_percent(rec.bits_niam, rec.embedded);
      row.acc += acc_percent(rec.bits_routed, rec.embedded);
    }
    const double inv = 1.0 / static_cast<double>(n_img);
    row.psnr1 *= inv;
    row.ssim1 *= inv;
    row.psnr2 = spec.kind == NoiseKind::Identity ? std::nan("") : p2 * inv;
    row.acc_im *= inv;
    row.acc_niam *= inv;
    row.acc *= inv;
    res.report.rows.push_back(row);
  }
  return res;
}

struct SweepRow {
  double strength = 0;
  double psnr_db = 0;
  double ssim_val = 0;
  double ber_pct = 0;
};

// Noise-free strength sweep: embedding distortion and extraction error as a
// function of the strength factor.
inline std::vector<SweepRow> strength_sweep(const CinModel<float>& model,
                                            const Dataset& ds,
                                            const std::vector<double>& strengths,
                                            std::uint64_t seed) {
  std::vector<SweepRow> rows;
  for (double s : strengths) {
    Rng rng(seed);
    SweepRow row;
    row.strength = s;
    for (Index i = 0; i < ds.count(); ++i) {
      TensorF cover = ds.images[i];
      TensorF msgs = random_messages(1, model.config().msg_len, rng);
      auto emb = model.embed(cover, msgs, static_cast<float>(s));
      row.psnr_db += psnr(cover, emb.watermarked);
      row.ssim_val += ssim(cover, emb.watermarked);
      row.ber_pct += ber_percent(
          threshold_bits(model.decode_im(emb.watermarked).logits),
          threshold_bits(msgs));
    }
    const double inv = 1.0 / static_cast<double>(ds.count());
    row.psnr_db *= inv;
    row.ssim_val *= inv;
    row.ber_pct *= inv;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace cin
