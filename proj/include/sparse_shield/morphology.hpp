#pragma once

#include <cstddef>

#include "sparse_shield/mask.hpp"

namespace sparse_shield {

/// All-ones structuring element with odd extents, centred on the pixel.
struct MorphKernel {
  std::size_t height = 3;
  std::size_t width = 3;

  static MorphKernel square(std::size_t k) { return {k, k}; }
  void validate() const;
  bool operator==(const MorphKernel&) const = default;
};

/// 1 iff every bit under the window is 1; out-of-range bits read as 0.
BinaryMask erode(const BinaryMask& mask, const MorphKernel& k);
/// 1 iff any bit under the window is 1; out-of-range bits read as 0.
BinaryMask dilate(const BinaryMask& mask, const MorphKernel& k);

/// Opening: dilate(erode(mask, k), k).
BinaryMask refine_mask(const BinaryMask& mask, const MorphKernel& k);
BinaryMask refine_mask(const BinaryMask& mask, const MorphKernel& erosion,
                       const MorphKernel& dilation);

}  // namespace sparse_shield
