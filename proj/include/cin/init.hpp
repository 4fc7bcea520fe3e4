#pragma once

#include <cmath>
#include <string>

#include "cin/rng.hpp"
#include "cin/tensor.hpp"

namespace cin {

// He-style fan-in initialization with the leaky_relu(0.2) gain; biases start
// at zero. Layers that must start as the identity are zero-initialized by
// their owners instead.

template <typename T>
Tensor<T> init_conv_weight(Index co, Index ci, Index k, Rng& rng,
                           std::string name) {
  const double fan_in = static_cast<double>(ci * k * k);
  const double std = std::sqrt(2.0 / ((1.0 + 0.2 * 0.2) * fan_in));
  Tensor<T> w = Tensor<T>::randn({co, ci, k, k}, rng, static_cast<T>(std), true);
  w.set_name(std::move(name));
  return w;
}

template <typename T>
Tensor<T> init_convt_weight(Index ci, Index co, Rng& rng, std::string name) {
  const double fan_in = static_cast<double>(ci * 4);
  const double std = std::sqrt(2.0 / ((1.0 + 0.2 * 0.2) * fan_in));
  Tensor<T> w = Tensor<T>::randn({ci, co, 2, 2}, rng, static_cast<T>(std), true);
  w.set_name(std::move(name));
  return w;
}

template <typename T>
Tensor<T> init_fc_weight(Index m, Index n, Rng& rng, std::string name) {
  const double std = std::sqrt(2.0 / ((1.0 + 0.2 * 0.2) * static_cast<double>(n)));
  Tensor<T> w = Tensor<T>::randn({m, n}, rng, static_cast<T>(std), true);
  w.set_name(std::move(name));
  return w;
}

template <typename T>
Tensor<T> init_zeros(Shape shape, std::string name) {
  Tensor<T> t = Tensor<T>::zeros(std::move(shape), true);
  t.set_name(std::move(name));
  return t;
}

}  // namespace cin
