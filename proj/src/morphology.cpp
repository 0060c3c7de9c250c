#include "sparse_shield/morphology.hpp"

#include "sparse_shield/error.hpp"

namespace sparse_shield {

void MorphKernel::validate() const {
  if (height < 1 || width < 1 || height % 2 == 0 || width % 2 == 0)
    throw Error(Errc::invalid_argument, "morphology kernel extents must be odd and >= 1");
}

namespace {

// want_all: erosion (AND over the window); otherwise dilation (OR).
BinaryMask sweep(const BinaryMask& mask, const MorphKernel& k, bool want_all) {
  k.validate();
  const auto h = static_cast<std::ptrdiff_t>(mask.height());
  const auto w = static_cast<std::ptrdiff_t>(mask.width());
  const auto ry = static_cast<std::ptrdiff_t>(k.height / 2);
  const auto rx = static_cast<std::ptrdiff_t>(k.width / 2);
  BinaryMask out(mask.height(), mask.width());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      bool result = want_all;
      for (std::ptrdiff_t dy = -ry; dy <= ry && result == want_all; ++dy) {
        for (std::ptrdiff_t dx = -rx; dx <= rx; ++dx) {
          const std::ptrdiff_t yy = y + dy, xx = x + dx;
          const bool inside = yy >= 0 && yy < h && xx >= 0 && xx < w;
          const bool bit = inside && mask.at(static_cast<std::size_t>(yy),
                                             static_cast<std::size_t>(xx));
          if (bit != want_all) {
            result = !want_all;
            break;
          }
        }
      }
      out.set(static_cast<std::size_t>(y), static_cast<std::size_t>(x), result);
    }
  }
  return out;
}

}  // namespace

BinaryMask erode(const BinaryMask& mask, const MorphKernel& k) {
  return sweep(mask, k, true);
}

BinaryMask dilate(const BinaryMask& mask, const MorphKernel& k) {
  return sweep(mask, k, false);
}

BinaryMask refine_mask(const BinaryMask& mask, const MorphKernel& k) {
  return dilate(erode(mask, k), k);
}

BinaryMask refine_mask(const BinaryMask& mask, const MorphKernel& erosion,
                       const MorphKernel& dilation) {
  return dilate(erode(mask, erosion), dilation);
}

}  // namespace sparse_shield
