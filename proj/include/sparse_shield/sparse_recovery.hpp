#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sparse_shield/dictionary.hpp"
#include "sparse_shield/linalg.hpp"
#include "sparse_shield/matrix.hpp"

namespace sparse_shield {

/// OMP stops once ||r|| <= kOmpTolerance * ||x||.
inline constexpr double kOmpTolerance = 1e-7;

struct SparseCode {
  std::vector<std::size_t> support;  // selection order
  std::vector<double> coefficients;  // aligned with support
  std::vector<double> residual;
  std::vector<double> reconstruction;
  std::vector<double> residual_norms;  // ||r_0|| = ||x||, then per iteration
};

/// Incremental OMP state: QR of the selected atoms plus the running
/// residual.
struct OmpState {
  explicit OmpState(std::span<const float> x);

  std::vector<double> input;
  IncrementalQr qr;
  std::vector<double> residual;
  std::vector<std::size_t> support;
};

/// Appends `atom` to the QR factors and applies r <- r - q (q^T r) with the
/// new orthonormal column. Throws Errc::rank_deficient (state unchanged) or
/// Errc::invalid_argument if the atom is already in the support.
void omp_qr_step(OmpState& state, const Dictionary& d, std::size_t atom);

/// Wall-clock split of one omp() call, seconds.
struct OmpProfile {
  double correlate = 0.0;
  double select = 0.0;
  double qr_update = 0.0;
  double residual_update = 0.0;
  double solve = 0.0;
  double total = 0.0;

  double component_sum() const noexcept {
    return correlate + select + qr_update + residual_update + solve;
  }
};

/// Orthogonal matching pursuit with at most `sparsity` atoms. Ties in
/// |D^T r| go to the smallest atom index. Stops early on a tiny residual,
/// a repeated atom, or a dependent atom.
SparseCode omp(const Dictionary& d, std::span<const float> x,
               std::size_t sparsity, OmpProfile* profile = nullptr);

struct BatchReconstruction {
  Matrix reconstruction;              // l x n
  Matrix residuals;                   // l x n
  std::vector<std::uint8_t> failed;   // per column
};

/// Column-wise omp over X (l x n), columns in parallel. sparsity 0 yields
/// zero reconstructions. A column whose coding throws is flagged, with
/// residual = x and reconstruction = 0.
BatchReconstruction batch_reconstruct(const Dictionary& d, const Matrix& x,
                                      std::size_t sparsity);

}  // namespace sparse_shield
