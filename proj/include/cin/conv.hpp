#pragma once

#include <Eigen/Dense>

#include "cin/ops.hpp"
#include "cin/parallel.hpp"

namespace cin {

namespace detail {

// Gather conv patches into a K x P column matrix, K = Ci*k*k, P = Ho*Wo.
template <typename T>
void im2col(const T* x, Index Ci, Index H, Index W, Index k, Index stride,
            Index pad, Index Ho, Index Wo, MatCM<T>& col) {
  for (Index oy = 0; oy < Ho; ++oy) {
    for (Index ox = 0; ox < Wo; ++ox) {
      const Index p = oy * Wo + ox;
      T* dst = col.data() + p * col.rows();
      for (Index ci = 0; ci < Ci; ++ci) {
        const T* plane = x + ci * H * W;
        for (Index ky = 0; ky < k; ++ky) {
          const Index iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) {
            for (Index kx = 0; kx < k; ++kx) *dst++ = T(0);
            continue;
          }
          const T* row = plane + iy * W;
          for (Index kx = 0; kx < k; ++kx) {
            const Index ix = ox * stride - pad + kx;
            *dst++ = (ix >= 0 && ix < W) ? row[ix] : T(0);
          }
        }
      }
    }
  }
}

// Scatter-add the column gradient back onto the input plane.
template <typename T>
void col2im(const MatCM<T>& col, Index Ci, Index H, Index W, Index k,
            Index stride, Index pad, Index Ho, Index Wo, T* gx) {
  for (Index oy = 0; oy < Ho; ++oy) {
    for (Index ox = 0; ox < Wo; ++ox) {
      const Index p = oy * Wo + ox;
      const T* src = col.data() + p * col.rows();
      for (Index ci = 0; ci < Ci; ++ci) {
        T* plane = gx + ci * H * W;
        for (Index ky = 0; ky < k; ++ky) {
          const Index iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) {
            src += k;
            continue;
          }
          T* row = plane + iy * W;
          for (Index kx = 0; kx < k; ++kx) {
            const Index ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < W) row[ix] += *src;
            ++src;
          }
        }
      }
    }
  }
}

}  // namespace detail

// Cross-correlation of x[B,Ci,H,W] with w[Co,Ci,k,k] plus bias[Co].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 Index stride = 1, Index pad = 0) {
  detail::check_rank4("conv2d input", x);
  detail::check_rank4("conv2d weight", w);
  const Index B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const Index Co = w.dim(0), k = w.dim(2);
  require_shape(w.dim(1) == Ci,
                "conv2d: weight expects " + std::to_string(w.dim(1)) +
                    " input channels, input has " + std::to_string(Ci));
  require_shape(w.dim(2) == w.dim(3), "conv2d: non-square kernel " +
                                          shape_str(w.shape()));
  require_shape(b.size() == Co, "conv2d: bias size " + std::to_string(b.size()) +
                                    " vs " + std::to_string(Co) + " output channels");
  require(k % 2 == 1 || (k == 2 && stride == 2),
          "conv2d: kernel must be odd, or 2 with stride 2");
  require(stride >= 1 && pad >= 0, "conv2d: bad stride/padding");
  const Index Ho = (H + 2 * pad - k) / stride + 1;
  const Index Wo = (W + 2 * pad - k) / stride + 1;
  require_shape(Ho >= 1 && Wo >= 1,
                "conv2d: kernel " + std::to_string(k) + " does not fit input " +
                    shape_str(x.shape()));

  const Index K = Ci * k * k, P = Ho * Wo;
  ArrayX<T> y(B * Co * P);
  Eigen::Map<const MatRM<T>> Wm(w.data(), Co, K);
  parallel_for(B, [&](Index bi) {
    MatCM<T> col(K, P);
    detail::im2col(x.data() + bi * Ci * H * W, Ci, H, W, k, stride, pad, Ho, Wo,
                   col);
    Eigen::Map<MatRM<T>> out(y.data() + bi * Co * P, Co, P);
    out.noalias() = Wm * col;
    for (Index co = 0; co < Co; ++co) out.row(co).array() += b[co];
  });

  return detail::make_op<T>(
      {B, Co, Ho, Wo}, std::move(y), {x, w, b},
      [B, Ci, H, W, Co, k, stride, pad, Ho, Wo, K, P](Node<T>& n) {
        auto& px = *n.parents[0];
        auto& pw = *n.parents[1];
        auto& pb = *n.parents[2];
        const bool need_x = px.requires_grad;
        const bool need_w = pw.requires_grad;
        const bool need_b = pb.requires_grad;
        if (!(need_x || need_w || need_b)) return;
        if (need_x && px.grad.size() == 0)
          px.grad = ArrayX<T>::Zero(px.value.size());
        Eigen::Map<const MatRM<T>> Wm(pw.value.data(), Co, K);

        std::vector<MatRM<T>> gw_parts;
        std::vector<ArrayX<T>> gb_parts;
        if (need_w) gw_parts.assign(B, MatRM<T>::Zero(Co, K));
        if (need_b) gb_parts.assign(B, ArrayX<T>::Zero(Co));

        parallel_for(B, [&](Index bi) {
          Eigen::Map<const MatRM<T>> g(n.grad.data() + bi * Co * P, Co, P);
          if (need_w || need_x) {
            MatCM<T> col(K, P);
            detail::im2col(px.value.data() + bi * Ci * H * W, Ci, H, W, k,
                           stride, pad, Ho, Wo, col);
            if (need_w) gw_parts[bi].noalias() = g * col.transpose();
            if (need_x) {
              MatCM<T> gcol(K, P);
              gcol.noalias() = Wm.transpose() * g;
              detail::col2im(gcol, Ci, H, W, k, stride, pad, Ho, Wo,
                             px.grad.data() + bi * Ci * H * W);
            }
          }
          if (need_b) gb_parts[bi] = g.rowwise().sum().array();
        });

        if (need_w) {
          if (pw.grad.size() == 0) pw.grad = ArrayX<T>::Zero(pw.value.size());
          Eigen::Map<MatRM<T>> gw(pw.grad.data(), Co, K);
          for (Index bi = 0; bi < B; ++bi) gw += gw_parts[bi];
        }
        if (need_b) {
          if (pb.grad.size() == 0) pb.grad = ArrayX<T>::Zero(pb.value.size());
          for (Index bi = 0; bi < B; ++bi) pb.grad += gb_parts[bi];
        }
      });
}

// Exact x2 upsampling: transpose of the stride-2 2x2 convolution.
// Weight layout is [Ci, Co, 2, 2].
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& w,
                           const Tensor<T>& b) {
  detail::check_rank4("conv_transpose2d input", x);
  detail::check_rank4("conv_transpose2d weight", w);
  const Index B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const Index Co = w.dim(1);
  require_shape(w.dim(0) == Ci,
                "conv_transpose2d: weight expects " + std::to_string(w.dim(0)) +
                    " input channels, input has " + std::to_string(Ci));
  require_shape(w.dim(2) == 2 && w.dim(3) == 2,
                "conv_transpose2d: kernel and stride are fixed at 2, weight is " +
                    shape_str(w.shape()));
  require_shape(b.size() == Co, "conv_transpose2d: bias size mismatch");

  const Index P = H * W, Ho = 2 * H, Wo = 2 * W;
  ArrayX<T> y(B * Co * Ho * Wo);
  Eigen::Map<const MatRM<T>> Wm(w.data(), Ci, Co * 4);
  parallel_for(B, [&](Index bi) {
    Eigen::Map<const MatRM<T>> X(x.data() + bi * Ci * P, Ci, P);
    MatCM<T> oc(Co * 4, P);
    oc.noalias() = Wm.transpose() * X;
    T* out = y.data() + bi * Co * Ho * Wo;
    for (Index co = 0; co < Co; ++co) {
      for (Index i = 0; i < H; ++i) {
        for (Index j = 0; j < W; ++j) {
          const Index p = i * W + j;
          T* o = out + co * Ho * Wo + 2 * i * Wo + 2 * j;
          const T* v = oc.data() + p * Co * 4 + co * 4;
          o[0] = v[0] + b[co];
          o[1] = v[1] + b[co];
          o[Wo] = v[2] + b[co];
          o[Wo + 1] = v[3] + b[co];
        }
      }
    }
  });

  return detail::make_op<T>(
      {B, Co, Ho, Wo}, std::move(y), {x, w, b},
      [B, Ci, H, W, Co, P, Ho, Wo](Node<T>& n) {
        auto& px = *n.parents[0];
        auto& pw = *n.parents[1];
        auto& pb = *n.parents[2];
        const bool need_x = px.requires_grad;
        const bool need_w = pw.requires_grad;
        const bool need_b = pb.requires_grad;
        if (!(need_x || need_w || need_b)) return;
        if (need_x && px.grad.size() == 0)
          px.grad = ArrayX<T>::Zero(px.value.size());
        Eigen::Map<const MatRM<T>> Wm(pw.value.data(), Ci, Co * 4);

        std::vector<MatRM<T>> gw_parts;
        std::vector<ArrayX<T>> gb_parts;
        if (need_w) gw_parts.assign(B, MatRM<T>::Zero(Ci, Co * 4));
        if (need_b) gb_parts.assign(B, ArrayX<T>::Zero(Co));

        parallel_for(B, [&](Index bi) {
          // Gather output grad into (Co*4) x P columns.
          MatCM<T> gc(Co * 4, P);
          const T* g = n.grad.data() + bi * Co * Ho * Wo;
          for (Index co = 0; co < Co; ++co) {
            for (Index i = 0; i < H; ++i) {
              for (Index j = 0; j < W; ++j) {
                const Index p = i * W + j;
                const T* src = g + co * Ho * Wo + 2 * i * Wo + 2 * j;
                T* v = gc.data() + p * Co * 4 + co * 4;
                v[0] = src[0];
                v[1] = src[1];
                v[2] = src[Wo];
                v[3] = src[Wo + 1];
              }
            }
          }
          if (need_x) {
            Eigen::Map<MatRM<T>> gx(px.grad.data() + bi * Ci * P, Ci, P);
            gx.noalias() += Wm * gc;
          }
          if (need_w) {
            Eigen::Map<const MatRM<T>> X(px.value.data() + bi * Ci * P, Ci, P);
            gw_parts[bi].noalias() = X * gc.transpose();
          }
          if (need_b) {
            for (Index co = 0; co < Co; ++co)
              gb_parts[bi][co] =
                  Eigen::Map<const ArrayX<T>>(g + co * Ho * Wo, Ho * Wo).sum();
          }
        });

        if (need_w) {
          if (pw.grad.size() == 0) pw.grad = ArrayX<T>::Zero(pw.value.size());
          Eigen::Map<MatRM<T>> gw(pw.grad.data(), Ci, Co * 4);
          for (Index bi = 0; bi < B; ++bi) gw += gw_parts[bi];
        }
        if (need_b) {
          if (pb.grad.size() == 0) pb.grad = ArrayX<T>::Zero(pb.value.size());
          for (Index bi = 0; bi < B; ++bi) pb.grad += gb_parts[bi];
        }
      });
}

// Affine map of x[B,N] by w[M,N] and bias[M].
template <typename T>
Tensor<T> fully_connected(const Tensor<T>& x, const Tensor<T>& w,
                          const Tensor<T>& b) {
  require_shape(x.rank() == 2, "fully_connected: input must be [B,N], got " +
                                   shape_str(x.shape()));
  require_shape(w.rank() == 2, "fully_connected: weight must be [M,N], got " +
                                   shape_str(w.shape()));
  const Index B = x.dim(0), N = x.dim(1), M = w.dim(0);
  require_shape(w.dim(1) == N, "fully_connected: inner dimensions disagree, " +
                                   shape_str(x.shape()) + " vs " +
                                   shape_str(w.shape()));
  require_shape(b.size() == M, "fully_connected: bias size mismatch");

  ArrayX<T> y(B * M);
  Eigen::Map<const MatRM<T>> X(x.data(), B, N), Wm(w.data(), M, N);
  Eigen::Map<MatRM<T>> Y(y.data(), B, M);
  Y.noalias() = X * Wm.transpose();
  Y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b.data(), M);

  return detail::make_op<T>(
      {B, M}, std::move(y), {x, w, b}, [B, N, M](Node<T>& n) {
        auto& px = *n.parents[0];
        auto& pw = *n.parents[1];
        auto& pb = *n.parents[2];
        Eigen::Map<const MatRM<T>> G(n.grad.data(), B, M);
        Eigen::Map<const MatRM<T>> Wm(pw.value.data(), M, N);
        Eigen::Map<const MatRM<T>> X(px.value.data(), B, N);
        if (px.requires_grad) {
          if (px.grad.size() == 0) px.grad = ArrayX<T>::Zero(px.value.size());
          Eigen::Map<MatRM<T>> gx(px.grad.data(), B, N);
          gx.noalias() += G * Wm;
        }
        if (pw.requires_grad) {
          if (pw.grad.size() == 0) pw.grad = ArrayX<T>::Zero(pw.value.size());
          Eigen::Map<MatRM<T>> gw(pw.grad.data(), M, N);
          gw.noalias() += G.transpose() * X;
        }
        if (pb.requires_grad) {
          if (pb.grad.size() == 0) pb.grad = ArrayX<T>::Zero(pb.value.size());
          Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gb(pb.grad.data(), M);
          gb.noalias() += G.colwise().sum().transpose();
        }
      });
}

// 2x2 average pooling, stride 2.
template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x) {
  detail::check_rank4("avg_pool2d", x);
  const Index B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  require_shape(H % 2 == 0 && W % 2 == 0,
                "avg_pool2d: extents must be even, got " + shape_str(x.shape()));
  const Index Ho = H / 2, Wo = W / 2;
  ArrayX<T> y(B * C * Ho * Wo);
  for (Index bc = 0; bc < B * C; ++bc) {
    const T* in = x.data() + bc * H * W;
    T* out = y.data() + bc * Ho * Wo;
    for (Index i = 0; i < Ho; ++i)
      for (Index j = 0; j < Wo; ++j) {
        const T* p = in + 2 * i * W + 2 * j;
        out[i * Wo + j] = (p[0] + p[1] + p[W] + p[W + 1]) * T(0.25);
      }
  }
  return detail::make_op<T>(
      {B, C, Ho, Wo}, std::move(y), {x}, [B, C, H, W, Ho, Wo](Node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        if (p.grad.size() == 0) p.grad = ArrayX<T>::Zero(p.value.size());
        for (Index bc = 0; bc < B * C; ++bc) {
          const T* g = n.grad.data() + bc * Ho * Wo;
          T* gx = p.grad.data() + bc * H * W;
          for (Index i = 0; i < Ho; ++i)
            for (Index j = 0; j < Wo; ++j) {
              const T v = g[i * Wo + j] * T(0.25);
              T* q = gx + 2 * i * W + 2 * j;
              q[0] += v;
              q[1] += v;
              q[W] += v;
              q[W + 1] += v;
            }
        }
      });
}

// Spatial mean per channel: [B,C,H,W] -> [B,C].
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  detail::check_rank4("global_avg_pool", x);
  const Index B = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
  ArrayX<T> y(B * C);
  for (Index bc = 0; bc < B * C; ++bc)
    y[bc] = x.array().segment(bc * plane, plane).mean();
  return detail::make_op<T>(
      {B, C}, std::move(y), {x}, [B, C, plane](Node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        if (p.grad.size() == 0) p.grad = ArrayX<T>::Zero(p.value.size());
        const T inv = T(1) / static_cast<T>(plane);
        for (Index bc = 0; bc < B * C; ++bc)
          p.grad.segment(bc * plane, plane) += n.grad[bc] * inv;
      });
}

// Bilinear resampling with half-pixel centers.
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& x, Index Ho, Index Wo) {
  detail::check_rank4("bilinear_resize", x);
  require(Ho >= 1 && Wo >= 1, "bilinear_resize: bad target extents");
  const Index B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);

  // Precompute 1-d gather weights.
  struct Tap {
    Index lo, hi;
    T wlo, whi;
  };
  auto taps = [](Index in, Index out) {
    std::vector<Tap> t(out);
    const double r = static_cast<double>(in) / static_cast<double>(out);
    for (Index o = 0; o < out; ++o) {
      double s = (static_cast<double>(o) + 0.5) * r - 0.5;
      if (s < 0) s = 0;
      if (s > in - 1) s = static_cast<double>(in - 1);
      Index lo = static_cast<Index>(s);
      if (lo > in - 2) lo = in >= 2 ? in - 2 : 0;
      double f = s - static_cast<double>(lo);
      Index hi = in >= 2 ? lo + 1 : lo;
      t[o] = {lo, hi, static_cast<T>(1.0 - f), static_cast<T>(f)};
    }
    return t;
  };
  auto ty = taps(H, Ho), tx = taps(W, Wo);

  ArrayX<T> y(B * C * Ho * Wo);
  for (Index bc = 0; bc < B * C; ++bc) {
    const T* in = x.data() + bc * H * W;
    T* out = y.data() + bc * Ho * Wo;
    for (Index i = 0; i < Ho; ++i) {
      const Tap& a = ty[i];
      for (Index j = 0; j < Wo; ++j) {
        const Tap& b = tx[j];
        out[i * Wo + j] = a.wlo * (b.wlo * in[a.lo * W + b.lo] +
                                   b.whi * in[a.lo * W + b.hi]) +
                          a.whi * (b.wlo * in[a.hi * W + b.lo] +
                                   b.whi * in[a.hi * W + b.hi]);
      }
    }
  }
  return detail::make_op<T>(
      {B, C, Ho, Wo}, std::move(y), {x},
      [B, C, H, W, Ho, Wo, ty = std::move(ty), tx = std::move(tx)](Node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        if (p.grad.size() == 0) p.grad = ArrayX<T>::Zero(p.value.size());
        for (Index bc = 0; bc < B * C; ++bc) {
          const T* g = n.grad.data() + bc * Ho * Wo;
          T* gx = p.grad.data() + bc * H * W;
          for (Index i = 0; i < Ho; ++i) {
            const auto& a = ty[i];
            for (Index j = 0; j < Wo; ++j) {
              const auto& b = tx[j];
              const T v = g[i * Wo + j];
              gx[a.lo * W + b.lo] += a.wlo * b.wlo * v;
              gx[a.lo * W + b.hi] += a.wlo * b.whi * v;
              gx[a.hi * W + b.lo] += a.whi * b.wlo * v;
              gx[a.hi * W + b.hi] += a.whi * b.whi * v;
            }
          }
        }
      });
}

// Mirror padding without edge duplication; needs pad <= extent-1.
template <typename T>
Tensor<T> reflect_pad2d(const Tensor<T>& x, Index pad) {
  detail::check_rank4("reflect_pad2d", x);
  const Index B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  require(pad >= 0 && pad <= H - 1 && pad <= W - 1,
          "reflect_pad2d: pad " + std::to_string(pad) + " too large for " +
              shape_str(x.shape()));
  const Index Ho = H + 2 * pad, Wo = W + 2 * pad;
  auto mirror = [](Index i, Index n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
  };
  ArrayX<T> y(B * C * Ho * Wo);
  for (Index bc = 0; bc < B * C; ++bc) {
    const T* in = x.data() + bc * H * W;
    T* out = y.data() + bc * Ho * Wo;
    for (Index i = 0; i < Ho; ++i) {
      const Index si = mirror(i - pad, H);
      for (Index j = 0; j < Wo; ++j)
        out[i * Wo + j] = in[si * W + mirror(j - pad, W)];
    }
  }
  return detail::make_op<T>(
      {B, C, Ho, Wo}, std::move(y), {x},
      [B, C, H, W, Ho, Wo, pad, mirror](Node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        if (p.grad.size() == 0) p.grad = ArrayX<T>::Zero(p.value.size());
        for (Index bc = 0; bc < B * C; ++bc) {
          const T* g = n.grad.data() + bc * Ho * Wo;
          T* gx = p.grad.data() + bc * H * W;
          for (Index i = 0; i < Ho; ++i) {
            const Index si = mirror(i - pad, H);
            for (Index j = 0; j < Wo; ++j)
              gx[si * W + mirror(j - pad, W)] += g[i * Wo + j];
          }
        }
      });
}

// Spatial crop [top, top+h) x [left, left+w).
template <typename T>
Tensor<T> crop2d(const Tensor<T>& x, Index top, Index left, Index h, Index w) {
  detail::check_rank4("crop2d", x);
  const Index B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  require_shape(top >= 0 && left >= 0 && h > 0 && w > 0 && top + h <= H &&
                    left + w <= W,
                "crop2d: window out of range for " + shape_str(x.shape()));
  ArrayX<T> y(B * C * h * w);
  for (Index bc = 0; bc < B * C; ++bc) {
    const T* in = x.data() + bc * H * W;
    T* out = y.data() + bc * h * w;
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < w; ++j)
        out[i * w + j] = in[(top + i) * W + left + j];
  }
  return detail::make_op<T>(
      {B, C, h, w}, std::move(y), {x},
      [B, C, H, W, top, left, h, w](Node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        if (p.grad.size() == 0) p.grad = ArrayX<T>::Zero(p.value.size());
        for (Index bc = 0; bc < B * C; ++bc) {
          const T* g = n.grad.data() + bc * h * w;
          T* gx = p.grad.data() + bc * H * W;
          for (Index i = 0; i < h; ++i)
            for (Index j = 0; j < w; ++j)
              gx[(top + i) * W + left + j] += g[i * w + j];
        }
      });
}

}  // namespace cin
