#include "tst/analysis/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "tst/errors.hpp"
#include "tst/random.hpp"

namespace tst::analysis {

void TsneOptions::validate() const {
  if (!(perplexity >= 1.0)) throw ConfigError("t-SNE perplexity must be at least 1");
  if (iterations == 0) throw ConfigError("t-SNE needs at least one iteration");
  if (!(learning_rate > 0.0)) throw ConfigError("t-SNE learning rate must be positive");
  if (!(exaggeration >= 1.0)) throw ConfigError("t-SNE exaggeration must be at least 1");
}

namespace {

void check_size(std::size_t n, double perplexity) {
  if (n > kTsneMaxPoints)
    throw ConfigError("exact t-SNE is limited to " + std::to_string(kTsneMaxPoints) + " points, got " +
                      std::to_string(n));
  if (3.0 * perplexity > static_cast<double>(n))
    throw ConfigError("t-SNE needs at least 3 * perplexity points: perplexity " + std::to_string(perplexity) +
                      " with " + std::to_string(n) + " points");
}

// Zero mean per column and divide by the largest absolute value.
std::vector<double> normalize(std::span<const double> points, std::size_t n, std::size_t dim) {
  std::vector<double> x(points.begin(), points.end());
  for (std::size_t d = 0; d < dim; ++d) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += x[i * dim + d];
    m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) x[i * dim + d] -= m;
  }
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : x) v /= peak;
  return x;
}

}  // namespace

std::vector<double> tsne_affinities(std::span<const double> points, std::size_t n, std::size_t dim,
                                    double perplexity) {
  if (points.size() != n * dim)
    throw DimensionError("t-SNE input has " + std::to_string(points.size()) + " values, expected " +
                         std::to_string(n) + " x " + std::to_string(dim));
  if (!(perplexity >= 1.0)) throw ConfigError("t-SNE perplexity must be at least 1");
  check_size(n, perplexity);
  for (double v : points)
    if (!std::isfinite(v)) throw NumericError("t-SNE input contains a non-finite value");

  const std::vector<double> x = normalize(points, n, dim);
  std::vector<double> d2(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = x[i * dim + k] - x[j * dim + k];
        s += diff * diff;
      }
      d2[i * n + j] = d2[j * n + i] = s;
    }

  const double target = std::log(perplexity);
  std::vector<double> p(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double beta = 1.0;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    double* row = &p[i * n];
    const double* dist = &d2[i * n];
    for (int iter = 0; iter < 200; ++iter) {
      // shift by the nearest neighbour distance so exp never underflows to all zeros
      double dmin = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) dmin = std::min(dmin, dist[j]);
      double sum = 0.0, weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        row[j] = j == i ? 0.0 : std::exp(-beta * (dist[j] - dmin));
        sum += row[j];
        weighted += row[j] * (dist[j] - dmin);
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
      const double gap = entropy - target;
      if (std::abs(gap) < 1e-5) break;
      if (gap > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = std::isinf(lo) ? beta / 2.0 : (beta + lo) / 2.0;
      }
    }
  }

  std::vector<double> joint(n * n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      joint[i * n + j] = p[i * n + j] + p[j * n + i];
      total += joint[i * n + j];
    }
  for (double& v : joint) v /= total;
  return joint;
}

double tsne_kl(std::span<const double> p, const std::vector<std::array<double, 2>>& y) {
  const std::size_t n = y.size();
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) {
        const double dx = y[i][0] - y[j][0], dy = y[i][1] - y[j][1];
        z += 1.0 / (1.0 + dx * dx + dy * dy);
      }
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double pij = p[i * n + j];
      if (i == j || pij <= 0.0) continue;
      const double dx = y[i][0] - y[j][0], dy = y[i][1] - y[j][1];
      const double q = std::max(1.0 / (1.0 + dx * dx + dy * dy) / z, 1e-300);
      kl += pij * std::log(pij / q);
    }
  return kl;
}

TsneResult tsne_embed(std::span<const double> points, std::size_t n, std::size_t dim, const TsneOptions& opt) {
  opt.validate();
  const std::vector<double> p = tsne_affinities(points, n, dim, opt.perplexity);

  std::mt19937_64 rng(derive_seed(opt.seed, SeedStream::Tsne));
  std::normal_distribution<double> gauss(0.0, 1e-4);
  std::vector<std::array<double, 2>> y(n);
  for (auto& v : y) v = {gauss(rng), gauss(rng)};
  std::vector<std::array<double, 2>> velocity(n, {0.0, 0.0}), gains(n, {1.0, 1.0}), grad(n);
  std::vector<double> num(n * n);

  TsneResult result;
  bool recorded = false;
  for (std::size_t iter = 0; iter < opt.iterations; ++iter) {
    if (!recorded && iter == opt.exaggeration_iters) {
      result.kl_after_exaggeration = tsne_kl(p, y);
      recorded = true;
    }
    const double exag = iter < opt.exaggeration_iters ? opt.exaggeration : 1.0;
    const double momentum = iter < opt.momentum_switch_iter ? opt.initial_momentum : opt.final_momentum;

    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      num[i * n + i] = 0.0;
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = y[i][0] - y[j][0], dy = y[i][1] - y[j][1];
        const double w = 1.0 / (1.0 + dx * dx + dy * dy);
        num[i * n + j] = num[j * n + i] = w;
        z += 2.0 * w;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      double gx = 0.0, gy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = num[i * n + j];
        const double f = (exag * p[i * n + j] - w / z) * w;
        gx += f * (y[i][0] - y[j][0]);
        gy += f * (y[i][1] - y[j][1]);
      }
      grad[i] = {4.0 * gx, 4.0 * gy};
    }
    double cx = 0.0, cy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < 2; ++k) {
        double& g = gains[i][k];
        g = (grad[i][k] > 0.0) != (velocity[i][k] > 0.0) ? g + 0.2 : g * 0.8;
        g = std::max(g, 0.01);
        velocity[i][k] = momentum * velocity[i][k] - opt.learning_rate * g * grad[i][k];
        y[i][k] += velocity[i][k];
      }
      cx += y[i][0];
      cy += y[i][1];
    }
    cx /= static_cast<double>(n);
    cy /= static_cast<double>(n);
    for (auto& v : y) {
      v[0] -= cx;
      v[1] -= cy;
    }
  }
  if (!recorded) result.kl_after_exaggeration = tsne_kl(p, y);
  result.kl_final = tsne_kl(p, y);
  for (const auto& v : y)
    if (!std::isfinite(v[0]) || !std::isfinite(v[1])) throw NumericError("t-SNE diverged to non-finite coordinates");
  result.coords = std::move(y);
  return result;
}

TsneResult tsne_embed(const std::vector<std::vector<double>>& points, const TsneOptions& options) {
  if (points.empty()) throw ConfigError("t-SNE needs at least one point");
  const std::size_t dim = points.front().size();
  std::vector<double> flat;
  flat.reserve(points.size() * dim);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != dim)
      throw DimensionError("t-SNE point " + std::to_string(i) + " has " + std::to_string(points[i].size()) +
                           " coordinates, expected " + std::to_string(dim));
    flat.insert(flat.end(), points[i].begin(), points[i].end());
  }
  return tsne_embed(flat, points.size(), dim, options);
}

}  // namespace tst::analysis
