#include "sparse_shield/tensor.hpp"

#include <cmath>
#include <string>

#include "sparse_shield/error.hpp"

namespace sparse_shield {

std::size_t Tensor::element_count(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (const std::size_t e : shape) n *= e;
  return n;
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(element_count(shape_), 0.0f) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  const std::size_t expected = element_count(shape_);
  if (expected != data_.size())
    throw Error(Errc::shape_mismatch,
                "tensor shape holds " + std::to_string(expected) +
                    " elements, payload has " + std::to_string(data_.size()));
  for (const float v : data_)
    if (!std::isfinite(v))
      throw Error(Errc::invalid_argument, "tensor holds a non-finite value");
}

}  // namespace sparse_shield
