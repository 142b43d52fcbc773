#include "tst/init.hpp"

#include <cmath>

namespace tst {

template <typename T>
Tensor<T> xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  std::vector<T> values(fan_in * fan_out);
  for (auto& v : values) v = static_cast<T>(u(rng));
  return Tensor<T>({fan_in, fan_out}, std::move(values), true);
}

template <typename T>
Tensor<T> normal(const Shape& shape, double stddev, Rng& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  std::vector<T> values(numel(shape));
  for (auto& v : values) v = static_cast<T>(n(rng));
  return Tensor<T>(shape, std::move(values), true);
}

template Tensor<float> xavier_uniform<float>(std::size_t, std::size_t, Rng&);
template Tensor<double> xavier_uniform<double>(std::size_t, std::size_t, Rng&);
template Tensor<float> normal<float>(const Shape&, double, Rng&);
template Tensor<double> normal<double>(const Shape&, double, Rng&);

}  // namespace tst
