#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace tst::analysis {

struct TsneOptions {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  double exaggeration = 12.0;
  std::size_t exaggeration_iters = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch_iter = 250;
  std::uint64_t seed = 0;

  void validate() const;
};

inline constexpr std::size_t kTsneMaxPoints = 5000;

struct TsneResult {
  std::vector<std::array<double, 2>> coords;
  /// KL(P || Q) with the true P, right after exaggeration is switched off.
  double kl_after_exaggeration = 0.0;
  double kl_final = 0.0;
};

/// Symmetrized joint affinities (n x n, row-major) of row-major points
/// [n, dim], each conditional row calibrated to `perplexity`.
std::vector<double> tsne_affinities(std::span<const double> points, std::size_t n, std::size_t dim,
                                    double perplexity);

/// Exact O(n^2) t-SNE to two dimensions. ConfigError when perplexity is
/// below 1 or above n/3, or when n exceeds kTsneMaxPoints.
TsneResult tsne_embed(std::span<const double> points, std::size_t n, std::size_t dim, const TsneOptions& options);
TsneResult tsne_embed(const std::vector<std::vector<double>>& points, const TsneOptions& options);

/// KL(P || Q) for a joint P and the Student-t Q induced by `coords`.
double tsne_kl(std::span<const double> p, const std::vector<std::array<double, 2>>& coords);

}  // namespace tst::analysis
