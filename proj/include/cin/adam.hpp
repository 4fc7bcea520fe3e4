#pragma once

#include <cstdint>
#include <vector>

#include "cin/tensor.hpp"

namespace cin {

template <typename T>
struct AdamState {
  ArrayX<T> m, v;
};

// Bias-corrected Adam over a fixed set of leaf parameters. Parameters keep
// their gradients until step() consumes them; step() rejects non-finite
// gradients before touching any state.
template <typename T>
class Adam {
 public:
  explicit Adam(T lr = T(1e-3), T beta1 = T(0.9), T beta2 = T(0.999),
                T eps = T(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void add_param(Tensor<T> p) {
    require(p.is_leaf() && p.requires_grad(),
            "Adam: parameters must be leaf tensors with requires_grad");
    states_.push_back(AdamState<T>{ArrayX<T>::Zero(p.size()),
                                   ArrayX<T>::Zero(p.size())});
    params_.push_back(std::move(p));
  }

  void add_params(const std::vector<Tensor<T>>& ps) {
    for (const auto& p : ps) add_param(p);
  }

  // One update over every owned parameter that has a gradient. Parameters
  // without a gradient this step are left untouched (their moments too).
  void step() {
    for (auto& p : params_) {
      if (!p.has_grad()) continue;
      require(p.grad().isFinite().all(),
              "Adam: non-finite gradient for parameter '" + p.name() +
                  "'; step rejected");
    }
    ++t_;
    const T c1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
    const T c2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (!p.has_grad()) continue;
      auto& st = states_[i];
      const ArrayX<T>& g = p.grad();
      st.m = beta1_ * st.m + (T(1) - beta1_) * g;
      st.v = beta2_ * st.v + (T(1) - beta2_) * g * g;
      p.mutable_array() -= lr_ * (st.m / c1) / ((st.v / c2).sqrt() + eps_);
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  T lr() const { return lr_; }
  void set_lr(T lr) { lr_ = lr; }
  std::int64_t step_count() const { return t_; }
  void set_step_count(std::int64_t t) { t_ = t; }

  const std::vector<Tensor<T>>& params() const { return params_; }
  std::vector<AdamState<T>>& states() { return states_; }
  const std::vector<AdamState<T>>& states() const { return states_; }

 private:
  T lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Tensor<T>> params_;
  std::vector<AdamState<T>> states_;
};

}  // namespace cin
