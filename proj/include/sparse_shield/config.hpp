#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace sparse_shield {

/// Parameters for building both analyzers. Threshold fields left empty are
/// derived from target_fpr.
struct DefenseConfig {
  std::size_t patch_size = 4;
  std::optional<std::size_t> dct_dim;  // checked against channels * P^2
  std::size_t dict_cols = 1000;
  std::size_t sparsity = 5;
  std::optional<double> eps2_dct;

  std::size_t feature_dict_cols = 420;
  std::size_t feature_sparsity = 80;
  std::optional<double> eps2_feature;

  double target_fpr = 0.05;
  double svd_energy_fraction = 0.90;

  // 0 selects the grid-size based default.
  std::size_t erosion_kernel = 0;
  std::size_t dilation_kernel = 0;

  std::optional<std::size_t> init_cols;  // m0, default max(1, m/20)
  std::size_t growth = 1;
  std::uint64_t seed = 0x5eed;

  void validate() const;
};

/// Parses flat `key = value` text; `#` starts a comment. Unknown keys are
/// rejected.
DefenseConfig parse_config(const std::string& text);
DefenseConfig load_config(const std::filesystem::path& path);

std::map<std::string, std::string> parse_key_values(const std::string& text);

}  // namespace sparse_shield
