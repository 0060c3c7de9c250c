#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sparse_shield {

/// Dense row-major float tensor. Shape is outermost-first. Every element is
/// finite; constructors reject NaN/Inf.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<float> data);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  bool operator==(const Tensor&) const = default;

  static std::size_t element_count(std::span<const std::size_t> shape);

 private:
  std::vector<std::size_t> shape_;
  std::vector<float> data_;
};

/// 8-bit image, row-major with interleaved channels (1 = gray, 3 = RGB).
struct ImageU8 {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;

  bool operator==(const ImageU8&) const = default;
};

}  // namespace sparse_shield
