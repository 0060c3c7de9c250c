#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace sparse_shield {

/// Row-major boolean grid; 1 marks an outlier region.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(std::size_t height, std::size_t width)
      : height_(height), width_(width), bits_(height * width, 0) {}
  BinaryMask(std::size_t height, std::size_t width,
             std::vector<std::uint8_t> bits);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool at(std::size_t y, std::size_t x) const {
    return bits_[y * width_ + x] != 0;
  }
  void set(std::size_t y, std::size_t x, bool v) {
    bits_[y * width_ + x] = v ? 1 : 0;
  }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }

  std::size_t popcount() const noexcept;
  bool any() const noexcept { return popcount() > 0; }

  BinaryMask inverted() const;

  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

  bool operator==(const BinaryMask&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace sparse_shield
