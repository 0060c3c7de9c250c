#include <doctest.h>

#include <cmath>

#include "sparse_shield/error.hpp"
#include "sparse_shield/linalg.hpp"
#include "sparse_shield/reference.hpp"
#include "support/oracles.hpp"

using namespace sparse_shield;

namespace {

long double rel_frobenius(const MatrixD& a, const MatrixD& b) {
  long double num = 0, den = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const long double d = a.data()[i] - b.data()[i];
    num += d * d;
    den += static_cast<long double>(b.data()[i]) * b.data()[i];
  }
  return std::sqrt(num / den);
}

MatrixD product(const MatrixD& a, const MatrixD& b) {
  MatrixD c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k)
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += a(i, k) * b(k, j);
  return c;
}

MatrixD random_d(std::size_t r, std::size_t c, Rng& rng) {
  MatrixD m(r, c);
  for (auto& v : m.data()) v = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("mvm hand cases") {
  const auto y = mvm(Matrix::identity(3), std::vector<float>{1, 2, 3});
  CHECK(y == std::vector<float>{1, 2, 3});
  const Matrix a(2, 2, {1, 2, 3, 4});
  CHECK(mvm(a, std::vector<float>{1, 1}) == std::vector<float>{3, 7});
  CHECK_THROWS_AS(mvm(a, std::vector<float>{1, 1, 1}), Error);
  CHECK_THROWS_AS((MvmPlan{0, 8}.validate()), Error);
}

TEST_CASE("mvm is bit identical across plans and matches the serial chunk tree") {
  Rng rng(3);
  const Matrix a = oracle::gaussian_matrix(64, 48, rng);
  const auto x = oracle::gaussian_vector(48, rng);
  for (const std::size_t simd : {1u, 3u, 8u, 16u}) {
    const auto serial = reference::mvm(a, x, simd);
    for (const std::size_t par : {1u, 2u, 4u, 7u}) CHECK(mvm(a, x, {par, simd}) == serial);
  }
  // Chunking changes bits only within rounding.
  const auto y1 = mvm(a, x, {1, 1});
  const auto y8 = mvm(a, x, {4, 8});
  const auto naive = oracle::multiply(oracle::to_mat(a), oracle::Vec(x.begin(), x.end()));
  for (std::size_t i = 0; i < 64; ++i) {
    CHECK(std::abs(y1[i] - static_cast<double>(naive[i])) < 1e-4);
    CHECK(std::abs(y8[i] - static_cast<double>(naive[i])) < 1e-4);
  }
}

TEST_CASE("mgs_qr hand cases") {
  const MatrixD diag(2, 2, {2, 0, 0, 3});
  const auto f = mgs_qr(diag);
  CHECK(f.q == MatrixD::identity(2));
  CHECK(f.r == MatrixD(2, 2, {2, 0, 0, 3}));

  const double s = 1.0 / std::sqrt(2.0);
  const MatrixD orth(2, 2, {s, s, s, -s});
  const auto g = mgs_qr(orth);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(g.q.data()[i] - orth.data()[i]) < 1e-6);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(g.r(i, j) - (i == j ? 1.0 : 0.0)) < 1e-6);

  const MatrixD dependent(3, 2, {1, 2, 1, 2, 1, 2});
  try {
    mgs_qr(dependent);
    FAIL("dependent columns accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::rank_deficient);
  }
}

TEST_CASE("mgs_qr reconstructs random matrices") {
  Rng rng(4);
  const MatrixD a = random_d(40, 10, rng);
  const auto f = mgs_qr(a);
  CHECK(rel_frobenius(product(f.q, f.r), a) < 1e-5);
  const MatrixD qtq = product(f.q.transposed(), f.q);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j) CHECK(std::abs(qtq(i, j) - (i == j)) < 1e-4);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(f.r(i, i) > 0);
    for (std::size_t j = 0; j < i; ++j) CHECK(f.r(i, j) == 0);
  }
  const Matrix af = a.cast<float>();
  const auto ff = mgs_qr(af);
  CHECK(rel_frobenius(product(ff.q.cast<double>(), ff.r.cast<double>()), af.cast<double>()) < 1e-5);
}

TEST_CASE("qr_append hand cases") {
  const MatrixD e1(2, 1, {1, 0});
  const MatrixD r1(1, 1, {1});
  const auto f = qr_append(e1, r1, std::span<const double>(std::vector<double>{0, 1}));
  CHECK(f.q == MatrixD::identity(2));
  CHECK(f.r == MatrixD::identity(2));
  const auto g = qr_append(e1, r1, std::span<const double>(std::vector<double>{0, 5}));
  CHECK(g.r(1, 1) == 5.0);
  CHECK_THROWS_AS(qr_append(e1, r1, std::span<const double>(std::vector<double>{3, 0})), Error);
}

TEST_CASE("folding qr_append equals batch mgs_qr") {
  Rng rng(5);
  const MatrixD a = random_d(30, 8, rng);
  MatrixD q(30, 0), r(0, 0);
  for (std::size_t j = 0; j < 8; ++j) {
    const auto col = a.col(j);
    auto f = qr_append(q, r, std::span<const double>(col));
    q = std::move(f.q);
    r = std::move(f.r);
  }
  const auto batch = mgs_qr(a);
  CHECK(rel_frobenius(q, batch.q) < 1e-4);
  CHECK(rel_frobenius(r, batch.r) < 1e-4);
}

TEST_CASE("IncrementalQr matches its dense views") {
  Rng rng(6);
  IncrementalQr qr(12);
  const MatrixD a = random_d(12, 5, rng);
  for (std::size_t j = 0; j < 5; ++j) qr.append(a.col(j));
  CHECK(qr.size() == 5);
  CHECK(rel_frobenius(product(qr.q_matrix(), qr.r_matrix()), a) < 1e-12);
  CHECK_FALSE(qr.try_append(a.col(2)));
  CHECK(qr.size() == 5);
}

TEST_CASE("ls_solve_qr") {
  const MatrixD i3 = MatrixD::identity(3);
  const std::vector<double> b{4, -1, 2};
  CHECK(ls_solve_qr(i3, i3, std::span<const double>(b)) == b);

  const MatrixD q(3, 2, {1, 0, 0, 1, 0, 0});
  const MatrixD r = MatrixD::identity(2);
  const std::vector<double> b3{1, 2, 3};
  const auto v = ls_solve_qr(q, r, std::span<const double>(b3));
  CHECK(v == std::vector<double>{1, 2});

  const MatrixD rz(2, 2, {1, 0, 0, 0});
  CHECK_THROWS_AS(ls_solve_qr(q, rz, std::span<const double>(b3)), Error);

  Rng rng(7);
  const MatrixD a = random_d(20, 6, rng);
  std::vector<double> rhs(20);
  for (auto& x : rhs) x = rng.normal();
  const auto f = mgs_qr(a);
  const auto sol = ls_solve_qr(f.q, f.r, std::span<const double>(rhs));
  oracle::Mat am(20, oracle::Vec(6));
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 6; ++j) am[i][j] = a(i, j);
  const auto ref = oracle::normal_equations(am, oracle::Vec(rhs.begin(), rhs.end()));
  for (std::size_t j = 0; j < 6; ++j)
    CHECK(std::abs(sol[j] - ref[j]) <= 1e-4 * std::max(1.0L, std::abs(ref[j])));
  // Residual is orthogonal to the column space.
  std::vector<double> res = rhs;
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 6; ++j) res[i] -= a(i, j) * sol[j];
  for (std::size_t j = 0; j < 6; ++j) {
    const auto c = a.col(j);
    CHECK(std::abs(dot(res, c)) < 1e-4 * norm2(rhs) * norm2(c));
  }
}

TEST_CASE("symmetric_eigen on a known spectrum") {
  const MatrixD s(2, 2, {2, 1, 1, 2});
  const auto e = symmetric_eigen(s);
  CHECK(e.values[0] == doctest::Approx(3.0));
  CHECK(e.values[1] == doctest::Approx(1.0));
  CHECK(std::abs(std::abs(e.vectors(0, 0)) - 1 / std::sqrt(2.0)) < 1e-9);
  try {
    symmetric_eigen(MatrixD(3, 3, {4, 1, 2, 1, 3, 1, 2, 1, 5}), 1e-30, 1);
    FAIL("converged in one sweep at tolerance 1e-30");
  } catch (const Error& err) {
    CHECK(err.code() == Errc::not_converged);
  }
}

TEST_CASE("truncated_svd hand cases") {
  const auto a = truncated_svd(Matrix(2, 2, {3, 0, 0, 0}), 0.9);
  CHECK(a.rank == 1);
  CHECK(a.singular_values[0] == doctest::Approx(3.0));
  const auto b = truncated_svd(Matrix(2, 2, {2, 0, 0, 1}), 0.79);
  CHECK(b.rank == 1);
  const auto c = truncated_svd(Matrix(2, 2, {2, 0, 0, 1}), 0.81);
  CHECK(c.rank == 2);
  CHECK(energy_rank(std::vector<double>{2, 1}, 0.8) == 1);
  CHECK_THROWS_AS(truncated_svd(Matrix(2, 2), 0.9), Error);
}

TEST_CASE("truncated_svd tail energy equals reconstruction error") {
  Rng rng(8);
  const Matrix x = oracle::gaussian_matrix(30, 20, rng);
  const auto svd = truncated_svd(x, 0.9);
  // Minimality of the rank.
  double total = 0, head = 0;
  for (const double s : svd.spectrum) total += s * s;
  for (std::size_t i = 0; i < svd.rank; ++i) head += svd.spectrum[i] * svd.spectrum[i];
  CHECK(head >= 0.9 * total);
  if (svd.rank > 1) CHECK(head - svd.spectrum[svd.rank - 1] * svd.spectrum[svd.rank - 1] < 0.9 * total);
  // Orthonormal basis.
  for (std::size_t a = 0; a < svd.rank; ++a)
    for (std::size_t b = 0; b < svd.rank; ++b) {
      long double s = 0;
      for (std::size_t i = 0; i < 30; ++i) s += static_cast<long double>(svd.basis(i, a)) * svd.basis(i, b);
      CHECK(std::abs(static_cast<double>(s) - (a == b)) < 1e-5);
    }
  // ||X - U U^T X||_F^2 == sum of the tail energy.
  long double err = 0;
  for (std::size_t j = 0; j < 20; ++j) {
    oracle::Vec col(30);
    for (std::size_t i = 0; i < 30; ++i) col[i] = x(i, j);
    oracle::Vec coef(svd.rank, 0);
    for (std::size_t k = 0; k < svd.rank; ++k)
      for (std::size_t i = 0; i < 30; ++i) coef[k] += svd.basis(i, k) * col[i];
    for (std::size_t i = 0; i < 30; ++i) {
      long double rec = 0;
      for (std::size_t k = 0; k < svd.rank; ++k) rec += svd.basis(i, k) * coef[k];
      err += (col[i] - rec) * (col[i] - rec);
    }
  }
  const double tail = total - head;
  CHECK(std::abs(static_cast<double>(err) - tail) <= 1e-3 * tail);
}

TEST_CASE("sym_inverse") {
  CHECK(sym_inverse(MatrixD::identity(3), 0.0) == MatrixD::identity(3));
  const auto inv = sym_inverse(MatrixD(2, 2, {2, 0, 0, 4}), 0.0);
  CHECK(inv(0, 0) == doctest::Approx(0.5));
  CHECK(inv(1, 1) == doctest::Approx(0.25));
  CHECK(inv(0, 1) == 0.0);

  Rng rng(9);
  const MatrixD b = random_d(10, 10, rng);
  MatrixD spd = product(b, b.transposed());
  for (std::size_t i = 0; i < 10; ++i) spd(i, i) += 0.5;
  const MatrixD p = product(spd, sym_inverse(spd, 0.0));
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j) CHECK(std::abs(p(i, j) - (i == j)) < 1e-3);

  CHECK_THROWS_AS(sym_inverse(MatrixD(2, 2, {1, 2, 0, 1}), 0.0), Error);
  CHECK_THROWS_AS(sym_inverse(MatrixD(2, 2), 0.0), Error);
  CHECK(default_ridge(MatrixD(2, 2, {2, 0, 0, 4})) == doctest::Approx(3e-6));
}
