#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sparse_shield/matrix.hpp"
#include "sparse_shield/tensor.hpp"

namespace sparse_shield::synthetic {

/// Uniform noise box-blurred `passes` times with a 3x3 window, rescaled to
/// [low, high]; [channels, height, width].
Tensor smoothed_noise(std::size_t channels, std::size_t height,
                      std::size_t width, std::uint64_t seed,
                      int passes = 5, float low = 0.15f, float high = 0.75f);

/// Writes `value` into a size x size square at (top, left) on all channels.
Tensor stamp_square(const Tensor& image, std::size_t top, std::size_t left,
                    std::size_t size, float value = 1.0f);

/// Fixed random "penultimate layer": tanh(W * avgpool2(x)) with W drawn from
/// `seed`. Stands in for a victim network's feature extractor.
class FeatureModel {
 public:
  FeatureModel(std::size_t channels, std::size_t height, std::size_t width,
               std::size_t feature_dim, std::uint64_t seed);

  std::vector<float> features(const Tensor& image) const;
  Matrix features(const std::vector<Tensor>& images) const;  // N x F

  std::size_t feature_dim() const noexcept { return weights_.rows(); }

 private:
  std::size_t channels_, height_, width_;
  Matrix weights_;
};

}  // namespace sparse_shield::synthetic
