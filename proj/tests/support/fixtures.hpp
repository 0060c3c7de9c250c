#pragma once

#include <cstdint>
#include <vector>

#include "sparse_shield/pipeline.hpp"
#include "sparse_shield/synthetic.hpp"

namespace fixture {

inline constexpr std::size_t kSide = 32;
inline constexpr std::size_t kChannels = 3;
inline constexpr std::size_t kFeatureDim = 64;
// Non-aligned 4x4 trigger near the bottom-right corner.
inline constexpr std::size_t kTriggerTop = 27;
inline constexpr std::size_t kTriggerLeft = 27;
inline constexpr std::size_t kTriggerSize = 4;

inline std::vector<sparse_shield::Tensor> clean_images(std::size_t n, std::uint64_t seed) {
  std::vector<sparse_shield::Tensor> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(sparse_shield::synthetic::smoothed_noise(kChannels, kSide, kSide, seed * 7919 + i));
  return out;
}

inline sparse_shield::Tensor with_trigger(const sparse_shield::Tensor& img) {
  return sparse_shield::synthetic::stamp_square(img, kTriggerTop, kTriggerLeft, kTriggerSize);
}

inline sparse_shield::synthetic::FeatureModel feature_model() {
  return {kChannels, kSide, kSide, kFeatureDim, 2024};
}

/// Patch-grid cells touched by the trigger.
inline bool trigger_patch(std::size_t py, std::size_t px, std::size_t p) {
  const auto overlaps = [](std::size_t a0, std::size_t a1, std::size_t b0, std::size_t b1) {
    return a0 < b1 && b0 < a1;
  };
  return overlaps(py * p, py * p + p, kTriggerTop, kTriggerTop + kTriggerSize) &&
         overlaps(px * p, px * p + p, kTriggerLeft, kTriggerLeft + kTriggerSize);
}

}  // namespace fixture
