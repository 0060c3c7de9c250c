#include "sparse_shield/mask.hpp"

#include <algorithm>
#include <string>

#include "sparse_shield/error.hpp"

namespace sparse_shield {

BinaryMask::BinaryMask(std::size_t height, std::size_t width,
                       std::vector<std::uint8_t> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
  if (bits_.size() != height_ * width_)
    throw Error(Errc::shape_mismatch,
                "mask " + std::to_string(height_) + "x" + std::to_string(width_) +
                    " given " + std::to_string(bits_.size()) + " bits");
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t BinaryMask::popcount() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

BinaryMask BinaryMask::inverted() const {
  BinaryMask out = *this;
  for (auto& b : out.bits_) b = b ? 0 : 1;
  return out;
}

}  // namespace sparse_shield
