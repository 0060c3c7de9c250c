#include "sparse_shield/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sparse_shield/error.hpp"

namespace sparse_shield {
namespace {

template <class X>
double chunked_dot(std::span<const float> row, std::span<const X> x,
                   std::size_t simd) {
  const std::size_t n = row.size();
  double total = 0.0;
  for (std::size_t start = 0; start < n; start += simd) {
    const std::size_t stop = std::min(n, start + simd);
    double partial = 0.0;
    for (std::size_t j = start; j < stop; ++j)
      partial += static_cast<double>(row[j]) * static_cast<double>(x[j]);
    total += partial;
  }
  return total;
}

template <class Out, class X>
std::vector<Out> mvm_impl(const Matrix& a, std::span<const X> x,
                          const MvmPlan& plan) {
  plan.validate();
  if (a.cols() != x.size())
    throw Error(Errc::dimension_mismatch,
                "mvm: matrix has " + std::to_string(a.cols()) +
                    " columns, vector has " + std::to_string(x.size()));
  const auto rows = static_cast<std::ptrdiff_t>(a.rows());
  std::vector<Out> y(a.rows());
  const std::size_t simd = plan.simd_width;
  const int workers = static_cast<int>(plan.par_rows);
#pragma omp parallel for num_threads(workers) schedule(static) if (workers > 1)
  for (std::ptrdiff_t i = 0; i < rows; ++i)
    y[static_cast<std::size_t>(i)] = static_cast<Out>(
        chunked_dot(a.row(static_cast<std::size_t>(i)), x, simd));
  return y;
}

double frobenius(const MatrixD& m) {
  double s = 0.0;
  for (const double v : m.data()) s += v * v;
  return std::sqrt(s);
}

}  // namespace

void MvmPlan::validate() const {
  if (par_rows < 1 || simd_width < 1)
    throw Error(Errc::invalid_argument, "mvm plan needs par_rows >= 1 and simd_width >= 1");
}

std::vector<float> mvm(const Matrix& a, std::span<const float> x,
                       const MvmPlan& plan) {
  return mvm_impl<float>(a, x, plan);
}

std::vector<double> mvm(const Matrix& a, std::span<const double> x,
                        const MvmPlan& plan) {
  return mvm_impl<double>(a, x, plan);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// ---------------------------------------------------------------------------
// Incremental QR

bool IncrementalQr::try_append(std::span<const double> col) {
  if (col.size() != rows_)
    throw Error(Errc::dimension_mismatch, "qr append: column length mismatch");
  const double original = norm2(col);
  std::vector<double> eps(col.begin(), col.end());
  std::vector<double> rcol(cols_ + 1, 0.0);
  for (std::size_t j = 0; j < cols_; ++j) {
    const auto q = q_col(j);
    const double rj = dot(q, eps);
    rcol[j] = rj;
    for (std::size_t k = 0; k < rows_; ++k) eps[k] -= rj * q[k];
  }
  const double rii = norm2(eps);
  if (!(original > 0.0) || rii <= kRankTolerance * original) return false;
  rcol[cols_] = rii;
  for (double& v : eps) v /= rii;
  q_.insert(q_.end(), eps.begin(), eps.end());
  r_cols_.push_back(std::move(rcol));
  ++cols_;
  return true;
}

void IncrementalQr::append(std::span<const double> col) {
  if (!try_append(col))
    throw Error(Errc::rank_deficient,
                "qr append: column " + std::to_string(cols_) +
                    " is numerically in the span of the previous columns");
}

double IncrementalQr::r(std::size_t i, std::size_t j) const {
  if (i > j) return 0.0;
  return r_cols_[j][i];
}

std::vector<double> IncrementalQr::back_substitute(
    std::span<const double> y) const {
  std::vector<double> v(cols_, 0.0);
  for (std::size_t kk = cols_; kk-- > 0;) {
    double s = y[kk];
    for (std::size_t j = kk + 1; j < cols_; ++j) s -= r_cols_[j][kk] * v[j];
    v[kk] = s / r_cols_[kk][kk];
  }
  return v;
}

std::vector<double> IncrementalQr::solve(std::span<const double> b) const {
  if (b.size() != rows_)
    throw Error(Errc::dimension_mismatch, "qr solve: rhs length mismatch");
  std::vector<double> y(cols_);
  for (std::size_t j = 0; j < cols_; ++j) y[j] = dot(q_col(j), b);
  return back_substitute(y);
}

MatrixD IncrementalQr::q_matrix() const {
  MatrixD q(rows_, cols_);
  for (std::size_t j = 0; j < cols_; ++j)
    for (std::size_t i = 0; i < rows_; ++i) q(i, j) = q_[j * rows_ + i];
  return q;
}

MatrixD IncrementalQr::r_matrix() const {
  MatrixD r(cols_, cols_);
  for (std::size_t j = 0; j < cols_; ++j)
    for (std::size_t i = 0; i <= j; ++i) r(i, j) = r_cols_[j][i];
  return r;
}

// ---------------------------------------------------------------------------
// Batch and single-step QR

template <class T>
QrFactors<T> mgs_qr(const BasicMatrix<T>& a) {
  const std::size_t m = a.rows(), n = a.cols();
  if (n > m)
    throw Error(Errc::invalid_argument, "mgs_qr needs cols <= rows");
  // Right-looking MGS: once q_k is known, sweep it out of all later columns.
  std::vector<std::vector<double>> v(n, std::vector<double>(m));
  std::vector<double> original(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) v[j][i] = static_cast<double>(a(i, j));
    original[j] = norm2(v[j]);
  }
  MatrixD r(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double rkk = norm2(v[k]);
    if (!(original[k] > 0.0) || rkk <= kRankTolerance * original[k])
      throw Error(Errc::rank_deficient,
                  "mgs_qr: column " + std::to_string(k) + " is linearly dependent");
    r(k, k) = rkk;
    for (double& x : v[k]) x /= rkk;
    for (std::size_t j = k + 1; j < n; ++j) {
      const double rkj = dot(v[k], v[j]);
      r(k, j) = rkj;
      for (std::size_t i = 0; i < m; ++i) v[j][i] -= rkj * v[k][i];
    }
  }
  MatrixD q(m, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i) q(i, j) = v[j][i];
  return {q.template cast<T>(), r.template cast<T>()};
}

template <class T>
QrFactors<T> qr_append(const BasicMatrix<T>& q_prev,
                       const BasicMatrix<T>& r_prev, std::span<const T> col) {
  const std::size_t m = q_prev.rows(), k = q_prev.cols();
  if (col.size() != m)
    throw Error(Errc::dimension_mismatch, "qr_append: column length mismatch");
  if (r_prev.rows() != k || r_prev.cols() != k)
    throw Error(Errc::dimension_mismatch, "qr_append: R does not match Q");
  std::vector<double> eps(col.begin(), col.end());
  const double original = norm2(eps);
  std::vector<double> rcol(k + 1, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    double rj = 0.0;
    for (std::size_t i = 0; i < m; ++i) rj += static_cast<double>(q_prev(i, j)) * eps[i];
    rcol[j] = rj;
    for (std::size_t i = 0; i < m; ++i) eps[i] -= rj * static_cast<double>(q_prev(i, j));
  }
  const double rii = norm2(eps);
  if (!(original > 0.0) || rii <= kRankTolerance * original)
    throw Error(Errc::rank_deficient,
                "qr_append: new column is numerically in span(Q)");
  rcol[k] = rii;

  BasicMatrix<T> q(m, k + 1);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) q(i, j) = q_prev(i, j);
    q(i, k) = static_cast<T>(eps[i] / rii);
  }
  BasicMatrix<T> r(k + 1, k + 1);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) r(i, j) = r_prev(i, j);
  for (std::size_t i = 0; i <= k; ++i) r(i, k) = static_cast<T>(rcol[i]);
  return {std::move(q), std::move(r)};
}

template <class T>
std::vector<T> ls_solve_qr(const BasicMatrix<T>& q, const BasicMatrix<T>& r,
                           std::span<const T> b) {
  const std::size_t m = q.rows(), n = q.cols();
  if (b.size() != m)
    throw Error(Errc::dimension_mismatch, "ls_solve_qr: rhs length mismatch");
  if (r.rows() != n || r.cols() != n)
    throw Error(Errc::dimension_mismatch, "ls_solve_qr: R does not match Q");
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    max_diag = std::max(max_diag, std::abs(static_cast<double>(r(i, i))));
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::abs(static_cast<double>(r(i, i)));
    if (!(d > 0.0) || d <= kRankTolerance * max_diag)
      throw Error(Errc::singular, "ls_solve_qr: R has a zero or tiny diagonal entry");
  }
  std::vector<double> y(n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i)
      y[j] += static_cast<double>(q(i, j)) * static_cast<double>(b[i]);
  std::vector<double> v(n, 0.0);
  for (std::size_t kk = n; kk-- > 0;) {
    double s = y[kk];
    for (std::size_t j = kk + 1; j < n; ++j) s -= static_cast<double>(r(kk, j)) * v[j];
    v[kk] = s / static_cast<double>(r(kk, kk));
  }
  return {v.begin(), v.end()};
}

template QrFactors<float> mgs_qr(const Matrix&);
template QrFactors<double> mgs_qr(const MatrixD&);
template QrFactors<float> qr_append(const Matrix&, const Matrix&, std::span<const float>);
template QrFactors<double> qr_append(const MatrixD&, const MatrixD&, std::span<const double>);
template std::vector<float> ls_solve_qr(const Matrix&, const Matrix&, std::span<const float>);
template std::vector<double> ls_solve_qr(const MatrixD&, const MatrixD&, std::span<const double>);

// ---------------------------------------------------------------------------
// Symmetric eigen-decomposition and truncated SVD

SymmetricEigen symmetric_eigen(const MatrixD& s, double tol, int max_sweeps) {
  const std::size_t n = s.rows();
  if (s.cols() != n)
    throw Error(Errc::invalid_argument, "symmetric_eigen needs a square matrix");
  MatrixD a = s;
  MatrixD v = MatrixD::identity(n);
  const double scale = frobenius(s);

  auto off_diagonal = [&] {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) acc += a(i, j) * a(i, j);
    return std::sqrt(acc);
  };

  int sweeps = 0;
  while (off_diagonal() >= tol * scale && scale > 0.0) {
    if (sweeps == max_sweeps)
      throw Error(Errc::not_converged,
                  "Jacobi eigensolver did not converge in " +
                      std::to_string(max_sweeps) + " sweeps");
    ++sweeps;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(tau * tau + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return a(x, x) > a(y, y);
  });
  SymmetricEigen out;
  out.sweeps = sweeps;
  out.values.resize(n);
  out.vectors = MatrixD(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

std::size_t energy_rank(std::span<const double> singular_values, double energy) {
  if (!(energy > 0.0 && energy <= 1.0))
    throw Error(Errc::invalid_argument, "energy fraction must lie in (0, 1]");
  double total = 0.0;
  for (const double s : singular_values) total += s * s;
  const double goal = energy * total;
  double cumulative = 0.0;
  for (std::size_t k = 0; k < singular_values.size(); ++k) {
    cumulative += singular_values[k] * singular_values[k];
    if (cumulative >= goal) return k + 1;
  }
  return singular_values.size();
}

TruncatedSvd truncated_svd(const Matrix& x, double energy) {
  const std::size_t l = x.rows(), n = x.cols();
  if (l == 0 || n == 0) throw Error(Errc::invalid_argument, "truncated_svd: empty matrix");
  MatrixD gram(l, l);
  const auto rows = static_cast<std::ptrdiff_t>(l);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const auto xi = x.row(i);
    for (std::size_t j = i; j < l; ++j) {
      const auto xj = x.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        s += static_cast<double>(xi[k]) * static_cast<double>(xj[k]);
      gram(i, j) = s;
    }
  }
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = 0; j < i; ++j) gram(i, j) = gram(j, i);

  const SymmetricEigen eig = symmetric_eigen(gram);
  TruncatedSvd out;
  const std::size_t keep = std::min(l, n);
  out.spectrum.resize(keep);
  for (std::size_t k = 0; k < keep; ++k)
    out.spectrum[k] = std::sqrt(std::max(eig.values[k], 0.0));
  double total = 0.0;
  for (const double s : out.spectrum) total += s * s;
  if (!(total > 0.0))
    throw Error(Errc::insufficient_data, "truncated_svd: matrix has zero energy");
  out.rank = energy_rank(out.spectrum, energy);
  out.singular_values.assign(out.spectrum.begin(),
                             out.spectrum.begin() + static_cast<std::ptrdiff_t>(out.rank));
  out.basis = Matrix(l, out.rank);
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t k = 0; k < out.rank; ++k)
      out.basis(i, k) = static_cast<float>(eig.vectors(i, k));
  return out;
}

// ---------------------------------------------------------------------------
// Symmetric inverse

double default_ridge(const MatrixD& s) {
  if (s.rows() == 0) return 0.0;
  double trace = 0.0;
  for (std::size_t i = 0; i < s.rows(); ++i) trace += s(i, i);
  return 1e-6 * trace / static_cast<double>(s.rows());
}

MatrixD sym_inverse(const MatrixD& s, double ridge) {
  const std::size_t n = s.rows();
  if (s.cols() != n) throw Error(Errc::invalid_argument, "sym_inverse needs a square matrix");
  double max_abs = 0.0;
  for (const double v : s.data()) max_abs = std::max(max_abs, std::abs(v));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(s(i, j) - s(j, i)) > 1e-6 * max_abs)
        throw Error(Errc::invalid_argument, "sym_inverse needs a symmetric matrix");

  IncrementalQr qr(n);
  std::vector<double> col(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = s(i, j) + (i == j ? ridge : 0.0);
    if (!qr.try_append(col))
      throw Error(Errc::singular, "sym_inverse: matrix is singular even after ridge");
  }
  // A^{-1} = R^{-1} Q^T, column k solves R x = row k of Q.
  MatrixD inv(n, n);
  const auto cols = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t kk = 0; kk < cols; ++kk) {
    const auto k = static_cast<std::size_t>(kk);
    std::vector<double> y(n);
    for (std::size_t j = 0; j < n; ++j) y[j] = qr.q_col(j)[k];
    const auto x = qr.back_substitute(y);
    for (std::size_t i = 0; i < n; ++i) inv(i, k) = x[i];
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double avg = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = avg;
      inv(j, i) = avg;
    }
  return inv;
}

Matrix sym_inverse(const Matrix& s, double ridge) {
  return sym_inverse(s.cast<double>(), ridge).cast<float>();
}

}  // namespace sparse_shield
