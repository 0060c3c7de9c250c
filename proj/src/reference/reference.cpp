#include "sparse_shield/reference.hpp"

#include <algorithm>

#include "sparse_shield/error.hpp"

namespace sparse_shield::reference {

std::vector<float> mvm(const Matrix& a, std::span<const float> x, std::size_t simd_width) {
  if (a.cols() != x.size()) throw Error(Errc::dimension_mismatch, "reference mvm: shape mismatch");
  if (simd_width == 0) throw Error(Errc::invalid_argument, "reference mvm: zero chunk width");
  std::vector<float> y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto row = a.row(i);
    double total = 0.0;
    for (std::size_t start = 0; start < row.size(); start += simd_width) {
      double partial = 0.0;
      for (std::size_t j = start; j < std::min(row.size(), start + simd_width); ++j)
        partial += static_cast<double>(row[j]) * static_cast<double>(x[j]);
      total += partial;
    }
    y[i] = static_cast<float>(total);
  }
  return y;
}

PatchGrid extract_dct(const Tensor& image, const DctBasis& basis) {
  if (image.rank() != 3) throw Error(Errc::shape_mismatch, "reference extract_dct: need [C, H, W]");
  const std::size_t p = basis.patch_size, pp = p * p;
  const std::size_t c = image.extent(0), h = image.extent(1), w = image.extent(2);
  if (h < p || w < p) throw Error(Errc::invalid_argument, "reference extract_dct: image too small");
  PatchGrid grid;
  grid.grid_y = h / p;
  grid.grid_x = w / p;
  grid.channels = c;
  grid.patch_size = p;
  grid.coefficients = Matrix(grid.patch_count(), c * pp);
  const auto pixels = image.data();
  std::vector<double> patch(pp);
  for (std::size_t py = 0; py < grid.grid_y; ++py)
    for (std::size_t px = 0; px < grid.grid_x; ++px) {
      auto out = grid.coefficients.row(py * grid.grid_x + px);
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t j = 0; j < p; ++j)
            patch[i * p + j] = pixels[(ch * h + py * p + i) * w + px * p + j];
        for (std::size_t z = 0; z < pp; ++z) {
          const auto row = basis.basis.row(basis.zigzag[z]);
          double s = 0.0;
          for (std::size_t t = 0; t < pp; ++t) s += row[t] * patch[t];
          out[ch * pp + z] = static_cast<float>(s);
        }
      }
    }
  return grid;
}

BatchReconstruction batch_reconstruct(const Dictionary& d, const Matrix& x, std::size_t sparsity) {
  if (x.rows() != d.dim())
    throw Error(Errc::dimension_mismatch, "reference batch_reconstruct: shape mismatch");
  if (sparsity > d.size())
    throw Error(Errc::invalid_argument, "reference batch_reconstruct: sparsity too large");
  const std::size_t l = x.rows(), n = x.cols();
  BatchReconstruction out{Matrix(l, n), Matrix(l, n), std::vector<std::uint8_t>(n, 0)};
  for (std::size_t j = 0; j < n; ++j) {
    const std::vector<float> column = x.col(j);
    try {
      const SparseCode code = omp(d, column, sparsity);
      for (std::size_t i = 0; i < l; ++i) {
        out.reconstruction(i, j) = static_cast<float>(code.reconstruction[i]);
        out.residuals(i, j) = static_cast<float>(code.residual[i]);
      }
    } catch (const Error&) {
      out.failed[j] = 1;
      for (std::size_t i = 0; i < l; ++i) out.residuals(i, j) = column[i];
    }
  }
  return out;
}

OutlierModel fit_moments(const Matrix& samples) {
  const std::size_t n = samples.rows(), d = samples.cols();
  if (n < 2) throw Error(Errc::insufficient_data, "reference fit_moments: need 2 samples");
  std::vector<double> mean(d, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < d; ++i) mean[i] += samples(k, i);
  for (double& m : mean) m /= static_cast<double>(n);
  const double scale = 1.0 / static_cast<double>(n - 1);
  Matrix cov(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        s += (samples(k, i) - mean[i]) * (samples(k, j) - mean[j]);
      cov(i, j) = cov(j, i) = static_cast<float>(s * scale);
    }
  std::vector<float> mean_f(mean.begin(), mean.end());
  return model_from_moments(std::move(mean_f), std::move(cov), n, 0.0);
}

}  // namespace sparse_shield::reference
