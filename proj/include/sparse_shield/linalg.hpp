#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sparse_shield/matrix.hpp"

namespace sparse_shield {

/// Parallelism for mvm: par_rows row-block workers, simd_width-long inner
/// chunks. Each output row is reduced chunk by chunk (f64 partials, then
/// left-to-right across chunks) by exactly one worker, so par_rows never
/// changes the result bits.
struct MvmPlan {
  std::size_t par_rows = 1;
  std::size_t simd_width = 8;

  void validate() const;
};

std::vector<float> mvm(const Matrix& a, std::span<const float> x,
                       const MvmPlan& plan = {});
std::vector<double> mvm(const Matrix& a, std::span<const double> x,
                        const MvmPlan& plan = {});

/// Relative threshold below which an orthogonalized column counts as
/// linearly dependent.
inline constexpr double kRankTolerance = 1e-7;

/// Column-wise modified Gram-Schmidt factorization that grows one column at
/// a time. Q is kept column-major, R upper triangular with positive diagonal.
class IncrementalQr {
 public:
  explicit IncrementalQr(std::size_t rows) : rows_(rows) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return cols_; }

  /// Orthogonalizes `col` against the current Q and appends it. Returns
  /// false (state untouched) if the remainder norm is below
  /// kRankTolerance times the column norm.
  bool try_append(std::span<const double> col);
  /// As try_append, but throws Errc::rank_deficient.
  void append(std::span<const double> col);

  std::span<const double> q_col(std::size_t j) const {
    return {q_.data() + j * rows_, rows_};
  }
  /// R[i, j], zero below the diagonal.
  double r(std::size_t i, std::size_t j) const;

  /// Solves R v = y by back substitution.
  std::vector<double> back_substitute(std::span<const double> y) const;
  /// Least-squares solution R^{-1} Q^T b.
  std::vector<double> solve(std::span<const double> b) const;

  MatrixD q_matrix() const;
  MatrixD r_matrix() const;

 private:
  std::size_t rows_;
  std::size_t cols_ = 0;
  std::vector<double> q_;                  // column-major rows_ x cols_
  std::vector<std::vector<double>> r_cols_;  // column j holds R[0..j, j]
};

template <class T>
struct QrFactors {
  BasicMatrix<T> q;
  BasicMatrix<T> r;
};

/// Batch MGS QR. Requires cols <= rows; throws Errc::rank_deficient.
template <class T>
QrFactors<T> mgs_qr(const BasicMatrix<T>& a);

/// Extends a thin QR factorization by one column (MGS step).
template <class T>
QrFactors<T> qr_append(const BasicMatrix<T>& q_prev,
                       const BasicMatrix<T>& r_prev, std::span<const T> col);

/// v = R^{-1} Q^T b. Throws Errc::singular on a zero or tiny R diagonal.
template <class T>
std::vector<T> ls_solve_qr(const BasicMatrix<T>& q, const BasicMatrix<T>& r,
                           std::span<const T> b);

struct SymmetricEigen {
  std::vector<double> values;  // descending
  MatrixD vectors;             // column k pairs with values[k]
  int sweeps = 0;
};

/// Cyclic Jacobi rotations. Converged when the off-diagonal Frobenius norm
/// drops below tol * ||S||_F; throws Errc::not_converged after max_sweeps.
SymmetricEigen symmetric_eigen(const MatrixD& s, double tol = 1e-7,
                               int max_sweeps = 64);

struct TruncatedSvd {
  Matrix basis;                         // U_r, l x r, orthonormal columns
  std::vector<double> singular_values;  // leading r values, descending
  std::vector<double> spectrum;         // all min(l, n) values
  std::size_t rank = 0;
};

/// Smallest k with sum_{i<k} s_i^2 >= energy * sum s_i^2.
std::size_t energy_rank(std::span<const double> singular_values,
                        double energy);

/// Left singular vectors of X (l x n) from the eigen-decomposition of X X^T,
/// truncated by energy_rank.
TruncatedSvd truncated_svd(const Matrix& x, double energy);

/// 1e-6 * trace(S) / dim.
double default_ridge(const MatrixD& s);

/// (S + ridge I)^{-1} through MGS QR. Throws Errc::singular.
MatrixD sym_inverse(const MatrixD& s, double ridge);
Matrix sym_inverse(const Matrix& s, double ridge);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

}  // namespace sparse_shield
