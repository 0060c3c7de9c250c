#include <doctest.h>

#include <numeric>

#include "sparse_shield/parallel.hpp"
#include "sparse_shield/reference.hpp"
#include "support/oracles.hpp"

using namespace sparse_shield;

TEST_CASE("parallel kernels are bit identical to the serial references") {
  Rng rng(81);
  const Matrix a = oracle::gaussian_matrix(200, 48, rng);
  const auto x = oracle::gaussian_vector(48, rng);
  std::vector<std::size_t> ids(300);
  std::iota(ids.begin(), ids.end(), 0u);
  const Dictionary d(oracle::unit_columns(48, 300, rng), ids, 0);
  const Matrix cols = oracle::gaussian_matrix(48, 120, rng);
  const Matrix samples = oracle::gaussian_matrix(500, 48, rng);
  const Tensor img = oracle::uniform_tensor({3, 64, 48}, rng);
  const auto basis = build_dct_basis(8);

  const auto ref_mvm = reference::mvm(a, x, 8);
  const auto ref_dct = reference::extract_dct(img, basis);
  const auto ref_batch = reference::batch_reconstruct(d, cols, 5);
  const auto ref_fit = reference::fit_moments(samples);

  for (const int threads : {1, 2, 4}) {
    CAPTURE(threads);
    set_num_threads(threads);
    CHECK(mvm(a, x, {static_cast<std::size_t>(threads), 8}) == ref_mvm);
    CHECK(extract_dct(img, basis).coefficients == ref_dct.coefficients);
    const auto b = batch_reconstruct(d, cols, 5);
    CHECK(b.residuals == ref_batch.residuals);
    CHECK(b.reconstruction == ref_batch.reconstruction);
    CHECK(b.failed == ref_batch.failed);
    const auto f = fit_moments(samples);
    CHECK(f.mean == ref_fit.mean);
    CHECK(f.covariance == ref_fit.covariance);
    CHECK(f.precision == ref_fit.precision);
  }
  set_num_threads(1);
}
