#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "tst/tensor.hpp"

namespace tst {

using Rng = std::mt19937_64;

/// Train/eval switch plus the generator that stochastic ops draw from.
struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;
};

// Differentiable primitives. Binary elementwise ops broadcast numpy-style
// over trailing dimensions; matmul broadcasts over leading batch dimensions.

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& x, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& x, T value);
template <typename T> Tensor<T> exp(const Tensor<T>& x);
template <typename T> Tensor<T> log(const Tensor<T>& x);

/// a[..., m, k] · b[..., k, n] -> [..., m, n]
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& order);
/// Swap the last two axes.
template <typename T> Tensor<T> transpose(const Tensor<T>& x);
template <typename T> Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);
/// Elements [begin, end) along `axis`; the axis is kept.
template <typename T> Tensor<T> slice(const Tensor<T>& x, int axis, std::size_t begin, std::size_t end);

template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);

/// Max-subtracted softmax along `axis`.
template <typename T> Tensor<T> softmax(const Tensor<T>& x, int axis);
template <typename T> Tensor<T> log_softmax(const Tensor<T>& x, int axis);

/// Normalizes over the last axis, then applies gain * x_hat + bias.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-5));

/// Exact GeLU, x * Phi(x).
template <typename T> Tensor<T> gelu(const Tensor<T>& x);

/// Inverted dropout. Identity when `training` is false or p_drop is 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p_drop, bool training, Rng* rng);

/// Mean over rows of -log softmax(logits)[label]; logits is [B, C].
template <typename T>
Tensor<T> cross_entropy_with_logits(const Tensor<T>& logits, std::span<const int> labels);

// Scalar references for the activation.
double gelu_erf(double x);
/// 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
double gelu_tanh(double x);

}  // namespace tst
