#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sparse_shield/matrix.hpp"

namespace sparse_shield {

/// Column-normalized overcomplete basis learned from benign data.
class Dictionary {
 public:
  Dictionary() = default;
  /// `atoms` is l x m; every column must have unit norm (1e-5) and
  /// source ids must be distinct.
  Dictionary(Matrix atoms, std::vector<std::size_t> source_ids,
             std::uint64_t seed);

  std::size_t dim() const noexcept { return atoms_.rows(); }
  std::size_t size() const noexcept { return atoms_.cols(); }

  const Matrix& atoms() const noexcept { return atoms_; }
  /// m x l copy (one atom per row) for correlation products.
  const Matrix& atoms_by_row() const noexcept { return by_row_; }
  std::span<const float> atom(std::size_t j) const { return by_row_.row(j); }

  const std::vector<std::size_t>& source_ids() const noexcept {
    return source_ids_;
  }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  Matrix atoms_;
  Matrix by_row_;
  std::vector<std::size_t> source_ids_;
  std::uint64_t seed_ = 0;
};

struct DictLearnConfig {
  std::size_t target_cols = 1;
  std::optional<std::size_t> init_cols;  // default max(1, m / 20)
  std::size_t growth = 1;
  std::uint64_t seed = 0;

  std::size_t initial_count() const;
  void validate() const;
};

/// Normalized residual at or below this fraction of ||x|| is treated as an
/// exact zero (selection probability 0).
inline constexpr double kZeroResidual = 1e-6;

/// Tracks the adaptive column-sampling distribution
///   p(i) ~ ||D_t D_t^+ x_i - x_i|| / ||x_i||
/// over the columns of X. Each selected column deflates every remaining
/// residual by its Gram-Schmidt direction, which keeps D_t's QR implicit.
class CssdSampler {
 public:
  explicit CssdSampler(const Matrix& x);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t columns() const noexcept { return n_; }
  std::size_t usable() const noexcept { return usable_; }
  std::size_t rank() const noexcept { return basis_.size(); }

  /// Unnormalized selection weights; zero for selected, zero-norm, and
  /// zero-residual columns.
  std::span<const double> weights() const noexcept { return weights_; }
  bool is_selected(std::size_t i) const { return selected_flag_[i] != 0; }
  const std::vector<std::size_t>& selected() const noexcept {
    return selected_;
  }

  /// Adds column i to D_t. Columns already in span(D_t) are recorded but
  /// do not extend the basis.
  void select(std::size_t i);

 private:
  std::size_t dim_;
  std::size_t n_;
  std::size_t usable_ = 0;
  std::vector<double> norms_;
  std::vector<double> residuals_;  // n_ x dim_, row per column of X
  std::vector<double> weights_;
  std::vector<std::uint8_t> selected_flag_;
  std::vector<std::size_t> selected_;
  std::vector<std::vector<double>> basis_;
};

/// Learns an m-atom dictionary from the columns of X (l x n): m0 uniform
/// picks, then rounds of `growth` draws without replacement from the CSSD
/// distribution. Once every remaining residual is zero the rest is filled
/// uniformly. Atoms are stored normalized.
Dictionary learn_dictionary(const Matrix& x, const DictLearnConfig& cfg);

/// ||D_t D_t^+ x - x|| through QR least squares. Throws Errc::rank_deficient
/// for dependent columns.
double projection_residual(const Matrix& d_t, std::span<const float> x);

/// Reference CSSD weights for a given selection, computed column by column
/// with projection_residual over a maximal independent subset.
std::vector<double> cssd_weights(const Matrix& x,
                                 std::span<const std::size_t> selected);

struct ReconstructionStats {
  double mean = 0.0;
  double max = 0.0;
};

/// Relative OMP reconstruction error ||x - x~|| / ||x|| over the columns of
/// `holdout` (zero columns contribute 0).
ReconstructionStats reconstruction_error_stats(const Dictionary& d,
                                               const Matrix& holdout,
                                               std::size_t sparsity);

}  // namespace sparse_shield
