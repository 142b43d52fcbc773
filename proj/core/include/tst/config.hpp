#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace tst {

enum class PositionEncoding { Learned1D, None };

std::string to_string(PositionEncoding pe);
/// Accepts "1d"/"learned1d" and "none" (case-insensitive).
PositionEncoding parse_position_encoding(std::string_view text);

/// Architecture and training hyperparameters. Defaults are the baseline
/// model: 2048-sample input cut into 256 subsequences of length 8.
struct TSTConfig {
  std::size_t series_length = 2048;
  std::size_t num_subsequences = 256;
  std::size_t dim = 128;
  std::size_t dim_mlp = 256;
  std::size_t key_dim = 64;
  std::size_t num_heads = 6;
  std::size_t depth = 6;
  double p_drop = 0.1;
  PositionEncoding position_encoding = PositionEncoding::Learned1D;
  std::size_t num_classes = 10;
  double initial_lr = 3e-5;
  std::size_t lr_step = 10;
  double lr_gamma = 0.8;
  std::size_t batch_size = 128;
  std::size_t epochs = 50;

  std::size_t subsequence_length() const { return series_length / num_subsequences; }
  std::size_t num_tokens() const { return num_subsequences + 1; }

  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// True when both configs produce identically shaped parameters.
  bool same_architecture(const TSTConfig& other) const;

  bool operator==(const TSTConfig&) const = default;
};

/// JSON object whose keys are the field names above.
std::string config_to_json(const TSTConfig& config, int indent = 2);
/// Missing keys keep their defaults; unknown keys are rejected.
TSTConfig config_from_json(std::string_view text);
TSTConfig load_config_file(const std::string& path);

}  // namespace tst
