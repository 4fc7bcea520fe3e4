#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cin/tensor.hpp"

namespace cin {

namespace detail {

template <typename T>
void check_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  require_shape(a.shape() == b.shape(),
                std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                    " vs " + shape_str(b.shape()));
}

template <typename T>
void check_rank4(const char* op, const Tensor<T>& x) {
  require_shape(x.rank() == 4, std::string(op) + ": expected a B x C x H x W tensor, got " +
                                   shape_str(x.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape("add", a, b);
  return detail::make_op<T>(
      a.shape(), a.array() + b.array(), {a, b}, [](Node<T>& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->acc_grad(n.grad);
        if (n.parents[1]->requires_grad) n.parents[1]->acc_grad(n.grad);
      });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape("sub", a, b);
  return detail::make_op<T>(
      a.shape(), a.array() - b.array(), {a, b}, [](Node<T>& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->acc_grad(n.grad);
        if (n.parents[1]->requires_grad) n.parents[1]->acc_grad_expr(-n.grad);
      });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape("mul", a, b);
  return detail::make_op<T>(
      a.shape(), a.array() * b.array(), {a, b}, [](Node<T>& n) {
        if (n.parents[0]->requires_grad)
          n.parents[0]->acc_grad_expr(n.grad * n.parents[1]->value);
        if (n.parents[1]->requires_grad)
          n.parents[1]->acc_grad_expr(n.grad * n.parents[0]->value);
      });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  return detail::make_op<T>(a.shape(), a.array() * c, {a}, [c](Node<T>& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->acc_grad_expr(n.grad * c);
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
  return detail::make_op<T>(a.shape(), a.array() + c, {a}, [](Node<T>& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->acc_grad(n.grad);
  });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
  return scale(a, T(-1));
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& a, T slope = T(0.2)) {
  ArrayX<T> y = (a.array() >= T(0)).select(a.array(), a.array() * slope);
  return detail::make_op<T>(a.shape(), std::move(y), {a}, [slope](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    const ArrayX<T>& x = n.parents[0]->value;
    n.parents[0]->acc_grad_expr(
        (x >= T(0)).select(n.grad, n.grad * slope));
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  ArrayX<T> y = a.array().max(T(0));
  return detail::make_op<T>(a.shape(), std::move(y), {a}, [](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    const ArrayX<T>& x = n.parents[0]->value;
    n.parents[0]->acc_grad_expr(
        (x > T(0)).select(n.grad, ArrayX<T>::Zero(x.size())));
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  // Stable in both tails.
  ArrayX<T> y(a.size());
  const ArrayX<T>& x = a.array();
  for (Index i = 0; i < x.size(); ++i) {
    T v = x[i];
    if (v >= T(0)) {
      y[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      T e = std::exp(v);
      y[i] = e / (T(1) + e);
    }
  }
  return detail::make_op<T>(a.shape(), std::move(y), {a}, [](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    const ArrayX<T>& s = n.value;
    n.parents[0]->acc_grad_expr(n.grad * s * (T(1) - s));
  });
}

// exp with a bounded exponent: exp(alpha * tanh(x / alpha)). The output is
// confined to [exp(-alpha), exp(alpha)], so the coupling-layer scale term can
// never overflow regardless of subnet output magnitude. Exactly invertible:
// the inverse direction multiplies by exp_clamped(-x) == 1 / exp_clamped(x).
template <typename T>
Tensor<T> exp_clamped(const Tensor<T>& a, T alpha = T(2)) {
  ArrayX<T> t = (a.array() / alpha).tanh();
  ArrayX<T> y = (alpha * t).exp();
  return detail::make_op<T>(
      a.shape(), std::move(y), {a}, [t = std::move(t)](Node<T>& n) {
        if (!n.parents[0]->requires_grad) return;
        n.parents[0]->acc_grad_expr(n.grad * n.value * (T(1) - t.square()));
      });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  ArrayX<T> y(1);
  y[0] = a.array().sum();
  return detail::make_op<T>({1}, std::move(y), {a}, [](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    n.parents[0]->acc_grad_expr(
        ArrayX<T>::Constant(n.parents[0]->value.size(), n.grad[0]));
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  ArrayX<T> y(1);
  y[0] = a.array().mean();
  return detail::make_op<T>({1}, std::move(y), {a}, [](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    const Index cnt = n.parents[0]->value.size();
    n.parents[0]->acc_grad_expr(
        ArrayX<T>::Constant(cnt, n.grad[0] / static_cast<T>(cnt)));
  });
}

template <typename T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> d = sub(a, b);
  return mean(mul(d, d));
}

// Mean binary cross-entropy from raw logits; numerically stable formulation.
// Targets are expected in {0,1} and carry no gradient.
template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets) {
  detail::check_same_shape("bce_with_logits", logits, targets);
  const ArrayX<T>& x = logits.array();
  const ArrayX<T>& t = targets.array();
  ArrayX<T> y(1);
  y[0] = (x.max(T(0)) - x * t + (T(1) + (-x.abs()).exp()).log()).mean();
  return detail::make_op<T>(
      {1}, std::move(y), {logits, targets}, [](Node<T>& n) {
        if (!n.parents[0]->requires_grad) return;
        const ArrayX<T>& x = n.parents[0]->value;
        const ArrayX<T>& t = n.parents[1]->value;
        ArrayX<T> s(x.size());
        for (Index i = 0; i < x.size(); ++i) {
          T v = x[i];
          s[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                           : std::exp(v) / (T(1) + std::exp(v));
        }
        const T inv = n.grad[0] / static_cast<T>(x.size());
        n.parents[0]->acc_grad_expr((s - t) * inv);
      });
}

// ---------------------------------------------------------------------------
// Structure
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  require_shape(numel(shape) == a.size(),
                "reshape: cannot view " + shape_str(a.shape()) + " as " +
                    shape_str(shape));
  return detail::make_op<T>(std::move(shape), ArrayX<T>(a.array()), {a},
                            [](Node<T>& n) {
                              if (n.parents[0]->requires_grad)
                                n.parents[0]->acc_grad(n.grad);
                            });
}

// Identity forward, zero adjoint. The result is a fresh leaf disconnected
// from the tape.
template <typename T>
Tensor<T> stop_gradient(const Tensor<T>& a) {
  return Tensor<T>::from_array(a.shape(), ArrayX<T>(a.array()), false);
}

// Concatenate B x C_i x H x W tensors along the channel axis.
template <typename T>
Tensor<T> channel_concat(const std::vector<Tensor<T>>& xs) {
  require(!xs.empty(), "channel_concat: empty input list");
  detail::check_rank4("channel_concat", xs[0]);
  const Index B = xs[0].dim(0), H = xs[0].dim(2), W = xs[0].dim(3);
  Index C = 0;
  for (const auto& x : xs) {
    detail::check_rank4("channel_concat", x);
    require_shape(x.dim(0) == B && x.dim(2) == H && x.dim(3) == W,
                  "channel_concat: incompatible shape " + shape_str(x.shape()) +
                      " vs " + shape_str(xs[0].shape()));
    C += x.dim(1);
  }
  const Index plane = H * W;
  ArrayX<T> y(B * C * plane);
  std::vector<Index> chans(xs.size());
  Index off = 0;
  for (size_t k = 0; k < xs.size(); ++k) {
    const Index ck = xs[k].dim(1);
    chans[k] = ck;
    for (Index b = 0; b < B; ++b) {
      y.segment((b * C + off) * plane, ck * plane) =
          xs[k].array().segment(b * ck * plane, ck * plane);
    }
    off += ck;
  }
  return detail::make_op<T>(
      {B, C, H, W}, std::move(y), xs,
      [B, C, plane, chans = std::move(chans)](Node<T>& n) {
        Index off = 0;
        for (size_t k = 0; k < n.parents.size(); ++k) {
          const Index ck = chans[k];
          auto& p = *n.parents[k];
          if (p.requires_grad) {
            if (p.grad.size() == 0) p.grad = ArrayX<T>::Zero(p.value.size());
            for (Index b = 0; b < B; ++b)
              p.grad.segment(b * ck * plane, ck * plane) +=
                  n.grad.segment((b * C + off) * plane, ck * plane);
          }
          off += ck;
        }
      });
}

template <typename T>
Tensor<T> channel_concat(const Tensor<T>& a, const Tensor<T>& b) {
  return channel_concat<T>(std::vector<Tensor<T>>{a, b});
}

// Slice channels [c0, c0+c) out of a B x C x H x W tensor.
template <typename T>
Tensor<T> channel_slice(const Tensor<T>& x, Index c0, Index c) {
  detail::check_rank4("channel_slice", x);
  const Index B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  require_shape(c0 >= 0 && c > 0 && c0 + c <= C,
                "channel_slice: channels [" + std::to_string(c0) + ", " +
                    std::to_string(c0 + c) + ") out of range for C=" +
                    std::to_string(C));
  const Index plane = H * W;
  ArrayX<T> y(B * c * plane);
  for (Index b = 0; b < B; ++b)
    y.segment(b * c * plane, c * plane) =
        x.array().segment((b * C + c0) * plane, c * plane);
  return detail::make_op<T>(
      {B, c, H, W}, std::move(y), {x}, [B, C, c0, c, plane](Node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        if (p.grad.size() == 0) p.grad = ArrayX<T>::Zero(p.value.size());
        for (Index b = 0; b < B; ++b)
          p.grad.segment((b * C + c0) * plane, c * plane) +=
              n.grad.segment(b * c * plane, c * plane);
      });
}

// Split a B x C x H x W tensor into equal channel groups.
template <typename T>
std::vector<Tensor<T>> channel_split(const Tensor<T>& x, Index groups) {
  detail::check_rank4("channel_split", x);
  require_shape(groups > 0 && x.dim(1) % groups == 0,
                "channel_split: C=" + std::to_string(x.dim(1)) +
                    " not divisible into " + std::to_string(groups) + " groups");
  const Index c = x.dim(1) / groups;
  std::vector<Tensor<T>> out;
  out.reserve(groups);
  for (Index g = 0; g < groups; ++g) out.push_back(channel_slice(x, g * c, c));
  return out;
}

// Per-channel scaling: x[b,c,:,:] * s[b,c]. s has shape [B, C].
template <typename T>
Tensor<T> mul_channelwise(const Tensor<T>& x, const Tensor<T>& s) {
  detail::check_rank4("mul_channelwise", x);
  require_shape(s.rank() == 2 && s.dim(0) == x.dim(0) && s.dim(1) == x.dim(1),
                "mul_channelwise: scale shape " + shape_str(s.shape()) +
                    " does not match " + shape_str(x.shape()));
  const Index B = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
  ArrayX<T> y(x.size());
  for (Index b = 0; b < B; ++b)
    for (Index c = 0; c < C; ++c)
      y.segment((b * C + c) * plane, plane) =
          x.array().segment((b * C + c) * plane, plane) * s.array()[b * C + c];
  return detail::make_op<T>(
      x.shape(), std::move(y), {x, s}, [B, C, plane](Node<T>& n) {
        auto& px = *n.parents[0];
        auto& ps = *n.parents[1];
        if (px.requires_grad) {
          if (px.grad.size() == 0) px.grad = ArrayX<T>::Zero(px.value.size());
          for (Index b = 0; b < B; ++b)
            for (Index c = 0; c < C; ++c)
              px.grad.segment((b * C + c) * plane, plane) +=
                  n.grad.segment((b * C + c) * plane, plane) *
                  ps.value[b * C + c];
        }
        if (ps.requires_grad) {
          if (ps.grad.size() == 0) ps.grad = ArrayX<T>::Zero(ps.value.size());
          for (Index b = 0; b < B; ++b)
            for (Index c = 0; c < C; ++c)
              ps.grad[b * C + c] +=
                  (n.grad.segment((b * C + c) * plane, plane) *
                   px.value.segment((b * C + c) * plane, plane))
                      .sum();
        }
      });
}

// Broadcast-add a per-batch scalar: x[b,:,:,:] + s[b]. s has shape [B] or [B,1].
template <typename T>
Tensor<T> add_per_batch(const Tensor<T>& x, const Tensor<T>& s) {
  detail::check_rank4("add_per_batch", x);
  const Index B = x.dim(0);
  require_shape(s.size() == B, "add_per_batch: expected " + std::to_string(B) +
                                   " scalars, got " + shape_str(s.shape()));
  const Index per = x.size() / B;
  ArrayX<T> y(x.size());
  for (Index b = 0; b < B; ++b)
    y.segment(b * per, per) = x.array().segment(b * per, per) + s.array()[b];
  return detail::make_op<T>(
      x.shape(), std::move(y), {x, s}, [B, per](Node<T>& n) {
        auto& px = *n.parents[0];
        auto& ps = *n.parents[1];
        if (px.requires_grad) px.acc_grad(n.grad);
        if (ps.requires_grad) {
          if (ps.grad.size() == 0) ps.grad = ArrayX<T>::Zero(ps.value.size());
          for (Index b = 0; b < B; ++b)
            ps.grad[b] += n.grad.segment(b * per, per).sum();
        }
      });
}

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <typename T>
Tensor<T> operator*(T c, const Tensor<T>& a) { return scale(a, c); }
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, T c) { return scale(a, c); }

}  // namespace cin
