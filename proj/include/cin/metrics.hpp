#pragma once

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cin/dem.hpp"
#include "cin/tensor.hpp"

namespace cin {

// Bit error ratio in percent over equal-length messages.
inline double ber_percent(const BitMessage& extracted, const BitMessage& embedded) {
  require(extracted.size() == embedded.size(),
          "ber: message lengths differ (" + std::to_string(extracted.size()) +
              " vs " + std::to_string(embedded.size()) + ")");
  return bit_error_fraction(extracted, embedded) * 100.0;
}

inline double acc_percent(const BitMessage& extracted, const BitMessage& embedded) {
  return 100.0 - ber_percent(extracted, embedded);
}

namespace detail {

// 8-bit quantization used by the image metrics; inputs live in [0,1].
template <typename T>
std::vector<double> quantize255(const Tensor<T>& t) {
  std::vector<double> out(t.size());
  for (Index i = 0; i < t.size(); ++i) {
    double v = static_cast<double>(t[i]);
    v = v < 0 ? 0 : (v > 1 ? 1 : v);
    out[i] = static_cast<double>(std::llround(v * 255.0));
  }
  return out;
}

inline std::vector<double> gaussian_window(int n, double sigma) {
  std::vector<double> w(n);
  double norm = 0;
  for (int i = 0; i < n; ++i) {
    const double d = i - (n - 1) / 2.0;
    w[i] = std::exp(-d * d / (2 * sigma * sigma));
    norm += w[i];
  }
  for (auto& v : w) v /= norm;
  return w;
}

}  // namespace detail

inline constexpr double kPsnrCap = 100.0;  // sentinel for identical images

// Standard peak signal-to-noise ratio on 8-bit quantized images:
// 10 log10(255^2 / MSE), capped at 100 dB.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b) {
  require_shape(a.shape() == b.shape(), "psnr: shape mismatch " +
                                            shape_str(a.shape()) + " vs " +
                                            shape_str(b.shape()));
  const auto qa = detail::quantize255(a);
  const auto qb = detail::quantize255(b);
  double sq = 0;
  for (size_t i = 0; i < qa.size(); ++i) {
    const double d = qa[i] - qb[i];
    sq += d * d;
  }
  const double mse = sq / static_cast<double>(qa.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

// Windowed structural similarity: 11x11 Gaussian window (sigma 1.5), valid
// placements only, C1=(0.01*255)^2, C2=(0.03*255)^2, averaged over windows
// and channels.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
  require_shape(a.shape() == b.shape(), "ssim: shape mismatch " +
                                            shape_str(a.shape()) + " vs " +
                                            shape_str(b.shape()));
  require_shape(a.rank() == 4, "ssim: expected [B,C,H,W]");
  const Index B = a.dim(0), C = a.dim(1), H = a.dim(2), W = a.dim(3);
  constexpr int win = 11;
  constexpr double C1 = (0.01 * 255) * (0.01 * 255);
  constexpr double C2 = (0.03 * 255) * (0.03 * 255);
  require_shape(H >= win && W >= win,
                "ssim: image smaller than the 11x11 window: " +
                    shape_str(a.shape()));
  const auto g = detail::gaussian_window(win, 1.5);
  const auto qa = detail::quantize255(a);
  const auto qb = detail::quantize255(b);

  double total = 0;
  long count = 0;
  for (Index bc = 0; bc < B * C; ++bc) {
    const double* x = qa.data() + bc * H * W;
    const double* y = qb.data() + bc * H * W;
    for (Index i = 0; i + win <= H; ++i) {
      for (Index j = 0; j + win <= W; ++j) {
        double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
        for (int u = 0; u < win; ++u) {
          const double gu = g[u];
          const double* xr = x + (i + u) * W + j;
          const double* yr = y + (i + u) * W + j;
          for (int v = 0; v < win; ++v) {
            const double wgt = gu * g[v];
            mx += wgt * xr[v];
            my += wgt * yr[v];
            mxx += wgt * xr[v] * xr[v];
            myy += wgt * yr[v] * yr[v];
            mxy += wgt * xr[v] * yr[v];
          }
        }
        const double vx = mxx - mx * mx;
        const double vy = myy - my * my;
        const double cxy = mxy - mx * my;
        const double s = ((2 * mx * my + C1) * (2 * cxy + C2)) /
                         ((mx * mx + my * my + C1) * (vx + vy + C2));
        total += s;
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

// One evaluated noise configuration; NaN marks an absent value (printed "-").
struct MetricRow {
  std::string noise;
  double factor = 0;
  double psnr1 = 0;  // cover vs watermarked
  double psnr2 = 0;  // watermarked vs noised; NaN for identity
  double ssim1 = 0;  // cover vs watermarked
  double acc_im = 0;
  double acc_niam = 0;
  double acc = 0;  // routed accuracy
};

struct MetricReport {
  std::vector<MetricRow> rows;

  void write_csv(std::ostream& os) const {
    os << "noise,factor,psnr1_db,psnr2_db,ssim,acc_im_pct,acc_niam_pct,acc_pct\n";
    auto cell = [&](double v) {
      if (std::isnan(v)) return std::string();
      std::ostringstream ss;
      ss << std::fixed << std::setprecision(4) << v;
      return ss.str();
    };
    for (const auto& r : rows) {
      os << r.noise << ',' << cell(r.factor) << ',' << cell(r.psnr1) << ','
         << cell(r.psnr2) << ',' << cell(r.ssim1) << ',' << cell(r.acc_im)
         << ',' << cell(r.acc_niam) << ',' << cell(r.acc) << '\n';
    }
  }

  void write_table(std::ostream& os) const {
    auto cell = [&](double v, int prec = 2) {
      if (std::isnan(v)) return std::string("-");
      std::ostringstream ss;
      ss << std::fixed << std::setprecision(prec) << v;
      return ss.str();
    };
    os << std::left << std::setw(16) << "noise" << std::right << std::setw(9)
       << "factor" << std::setw(10) << "PSNR1" << std::setw(10) << "PSNR2"
       << std::setw(9) << "SSIM" << std::setw(9) << "AccIM" << std::setw(10)
       << "AccNIAM" << std::setw(8) << "Acc" << '\n';
    for (const auto& r : rows) {
      os << std::left << std::setw(16) << r.noise << std::right << std::setw(9)
         << cell(r.factor, 3) << std::setw(10) << cell(r.psnr1) << std::setw(10)
         << cell(r.psnr2) << std::setw(9) << cell(r.ssim1, 4) << std::setw(9)
         << cell(r.acc_im) << std::setw(10) << cell(r.acc_niam) << std::setw(8)
         << cell(r.acc) << '\n';
    }
  }
};

}  // namespace cin
