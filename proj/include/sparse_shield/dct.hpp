#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sparse_shield/mask.hpp"
#include "sparse_shield/matrix.hpp"
#include "sparse_shield/tensor.hpp"

namespace sparse_shield {

/// Orthonormal type-II 2-D DCT for P x P patches. Row u*P+v of `basis`
/// holds C_uv cos(u pi (i + 1/2) / P) cos(v pi (j + 1/2) / P) over the
/// raster index i*P+j, with C_uv = a(u) a(v), a(0) = sqrt(1/P),
/// a(k>0) = sqrt(2/P).
struct DctBasis {
  std::size_t patch_size = 0;
  MatrixD basis;
  std::vector<std::size_t> zigzag;  // zigzag position -> raster index
};

DctBasis build_dct_basis(std::size_t patch_size);

/// JPEG-style anti-diagonal traversal of a P x P grid. Element k is the
/// raster index (row * P + col) visited k-th.
std::vector<std::size_t> zigzag_order(std::size_t patch_size);

/// Per-patch coefficient vectors. Row k = patch (k / grid_x, k % grid_x);
/// each row is channel-major, zigzag-ordered within a channel.
struct PatchGrid {
  std::size_t grid_y = 0;
  std::size_t grid_x = 0;
  std::size_t channels = 0;
  std::size_t patch_size = 0;
  Matrix coefficients;  // (grid_y * grid_x) x (channels * P^2)

  std::size_t patch_count() const noexcept { return grid_y * grid_x; }
  std::size_t dim() const noexcept {
    return channels * patch_size * patch_size;
  }
};

/// Crops [C,H,W] to multiples of P (bottom/right) and transforms every
/// non-overlapping patch. Patches are processed in parallel.
PatchGrid extract_dct(const Tensor& image, const DctBasis& basis);

/// Inverse transform back to the cropped [C, grid_y*P, grid_x*P] image.
Tensor inverse_dct(const PatchGrid& grid, const DctBasis& basis);

/// Nearest-neighbour upsampling: every bit becomes a P x P block.
BinaryMask upsample_mask(const BinaryMask& patch_mask, std::size_t patch_size);

/// Zero-extends a mask to height x width (covers the cropped border).
BinaryMask pad_mask(const BinaryMask& mask, std::size_t height,
                    std::size_t width);

/// Replaces masked pixels by the per-channel mean of the unmasked pixels.
/// If the mask covers the whole image, `fallback_means` (one per channel)
/// is used instead. Mask extents must equal the image's H and W.
Tensor suppress(const Tensor& image, const BinaryMask& mask,
                std::span<const float> fallback_means);

}  // namespace sparse_shield
