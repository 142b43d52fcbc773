#pragma once

#include "tst/ops.hpp"

namespace tst {

/// Glorot/Xavier uniform on a [fan_in, fan_out] matrix.
template <typename T>
Tensor<T> xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

template <typename T>
Tensor<T> normal(const Shape& shape, double stddev, Rng& rng);

}  // namespace tst
