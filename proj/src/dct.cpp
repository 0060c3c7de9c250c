#include "sparse_shield/dct.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "sparse_shield/error.hpp"

namespace sparse_shield {

std::vector<std::size_t> zigzag_order(std::size_t p) {
  std::vector<std::size_t> order;
  order.reserve(p * p);
  if (p == 0) return order;
  for (std::size_t diag = 0; diag <= 2 * (p - 1); ++diag) {
    const std::size_t lo = diag < p ? 0 : diag - (p - 1);
    const std::size_t hi = diag < p ? diag : p - 1;
    if (diag % 2 == 1) {
      for (std::size_t r = lo; r <= hi; ++r) order.push_back(r * p + (diag - r));
    } else {
      for (std::size_t r = hi + 1; r-- > lo;) order.push_back(r * p + (diag - r));
    }
  }
  return order;
}

DctBasis build_dct_basis(std::size_t p) {
  if (p == 0) throw Error(Errc::invalid_argument, "patch size must be >= 1");
  const double pd = static_cast<double>(p);
  auto alpha = [&](std::size_t k) {
    return k == 0 ? std::sqrt(1.0 / pd) : std::sqrt(2.0 / pd);
  };
  DctBasis out;
  out.patch_size = p;
  out.basis = MatrixD(p * p, p * p);
  for (std::size_t u = 0; u < p; ++u)
    for (std::size_t v = 0; v < p; ++v) {
      const double c = alpha(u) * alpha(v);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
          out.basis(u * p + v, i * p + j) =
              c * std::cos(static_cast<double>(u) * std::numbers::pi / pd * (i + 0.5)) *
              std::cos(static_cast<double>(v) * std::numbers::pi / pd * (j + 0.5));
    }
  out.zigzag = zigzag_order(p);
  return out;
}

PatchGrid extract_dct(const Tensor& image, const DctBasis& basis) {
  if (image.rank() != 3)
    throw Error(Errc::shape_mismatch, "extract_dct expects a [C, H, W] tensor");
  const std::size_t p = basis.patch_size;
  const std::size_t c = image.extent(0), h = image.extent(1), w = image.extent(2);
  if (h < p || w < p)
    throw Error(Errc::invalid_argument,
                "image " + std::to_string(h) + "x" + std::to_string(w) +
                    " is smaller than one " + std::to_string(p) + "x" +
                    std::to_string(p) + " patch");
  PatchGrid grid;
  grid.grid_y = h / p;
  grid.grid_x = w / p;
  grid.channels = c;
  grid.patch_size = p;
  const std::size_t pp = p * p;
  grid.coefficients = Matrix(grid.patch_count(), c * pp);
  const auto pixels = image.data();
  const auto patches = static_cast<std::ptrdiff_t>(grid.patch_count());

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t kk = 0; kk < patches; ++kk) {
    const auto k = static_cast<std::size_t>(kk);
    const std::size_t py = k / grid.grid_x, px = k % grid.grid_x;
    std::vector<double> patch(pp);
    auto out = grid.coefficients.row(k);
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

Tensor inverse_dct(const PatchGrid& grid, const DctBasis& basis) {
  const std::size_t p = basis.patch_size;
  if (p != grid.patch_size)
    throw Error(Errc::dimension_mismatch, "inverse_dct: patch size mismatch");
  const std::size_t c = grid.channels, pp = p * p;
  const std::size_t h = grid.grid_y * p, w = grid.grid_x * p;
  Tensor out({c, h, w});
  auto pixels = out.data();
  for (std::size_t k = 0; k < grid.patch_count(); ++k) {
    const std::size_t py = k / grid.grid_x, px = k % grid.grid_x;
    const auto coeffs = grid.coefficients.row(k);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t t = 0; t < pp; ++t) {
        double s = 0.0;
        for (std::size_t z = 0; z < pp; ++z)
          s += basis.basis(basis.zigzag[z], t) * coeffs[ch * pp + z];
        const std::size_t i = t / p, j = t % p;
        pixels[(ch * h + py * p + i) * w + px * p + j] = static_cast<float>(s);
      }
  }
  return out;
}

BinaryMask upsample_mask(const BinaryMask& patch_mask, std::size_t p) {
  BinaryMask out(patch_mask.height() * p, patch_mask.width() * p);
  for (std::size_t y = 0; y < out.height(); ++y)
    for (std::size_t x = 0; x < out.width(); ++x)
      out.set(y, x, patch_mask.at(y / p, x / p));
  return out;
}

BinaryMask pad_mask(const BinaryMask& mask, std::size_t height, std::size_t width) {
  if (mask.height() > height || mask.width() > width)
    throw Error(Errc::dimension_mismatch, "pad_mask: target smaller than mask");
  BinaryMask out(height, width);
  for (std::size_t y = 0; y < mask.height(); ++y)
    for (std::size_t x = 0; x < mask.width(); ++x) out.set(y, x, mask.at(y, x));
  return out;
}

Tensor suppress(const Tensor& image, const BinaryMask& mask,
                std::span<const float> fallback_means) {
  if (image.rank() != 3)
    throw Error(Errc::shape_mismatch, "suppress expects a [C, H, W] tensor");
  const std::size_t c = image.extent(0), h = image.extent(1), w = image.extent(2);
  if (mask.height() != h || mask.width() != w)
    throw Error(Errc::dimension_mismatch, "suppress: mask and image sizes differ");
  if (mask.popcount() == 0) return image;

  const bool all_masked = mask.popcount() == mask.size();
  if (all_masked && fallback_means.size() != c)
    throw Error(Errc::invalid_argument,
                "suppress: mask covers the whole image and no fallback means were given");

  std::vector<float> data(image.data().begin(), image.data().end());
  for (std::size_t ch = 0; ch < c; ++ch) {
    float fill = 0.0f;
    if (all_masked) {
      fill = fallback_means[ch];
    } else {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t i = 0; i < h * w; ++i)
        if (!mask[i]) {
          sum += data[ch * h * w + i];
          ++count;
        }
      fill = static_cast<float>(sum / static_cast<double>(count));
    }
    for (std::size_t i = 0; i < h * w; ++i)
      if (mask[i]) data[ch * h * w + i] = fill;
  }
  return Tensor(image.shape(), std::move(data));
}

}  // namespace sparse_shield
