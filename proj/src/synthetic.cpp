#include "sparse_shield/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "sparse_shield/error.hpp"
#include "sparse_shield/rng.hpp"

namespace sparse_shield::synthetic {
namespace {

std::vector<float> blur_plane(const std::vector<float>& src, std::size_t h, std::size_t w) {
  std::vector<float> out(src.size());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double sum = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const auto yy = static_cast<std::size_t>(
              std::clamp<long>(static_cast<long>(y) + dy, 0, static_cast<long>(h) - 1));
          const auto xx = static_cast<std::size_t>(
              std::clamp<long>(static_cast<long>(x) + dx, 0, static_cast<long>(w) - 1));
          sum += src[yy * w + xx];
        }
      out[y * w + x] = static_cast<float>(sum / 9.0);
    }
  return out;
}

}  // namespace

Tensor smoothed_noise(std::size_t channels, std::size_t height, std::size_t width,
                      std::uint64_t seed, int passes, float low, float high) {
  if (channels == 0 || height == 0 || width == 0 || passes < 0 || !(low <= high))
    throw Error(Errc::invalid_argument, "smoothed_noise: bad geometry or range");
  Rng rng(seed);
  const std::size_t plane = height * width;
  std::vector<float> data(channels * plane);
  for (std::size_t c = 0; c < channels; ++c) {
    std::vector<float> p(plane);
    for (auto& v : p) v = static_cast<float>(rng.uniform());
    for (int k = 0; k < passes; ++k) p = blur_plane(p, height, width);
    const auto [mn, mx] = std::minmax_element(p.begin(), p.end());
    const float lo = *mn, span = *mx - *mn;
    for (std::size_t i = 0; i < plane; ++i)
      data[c * plane + i] =
          span > 0.0f ? low + (high - low) * (p[i] - lo) / span : 0.5f * (low + high);
  }
  return Tensor({channels, height, width}, std::move(data));
}

Tensor stamp_square(const Tensor& image, std::size_t top, std::size_t left,
                    std::size_t size, float value) {
  if (image.rank() != 3 || top + size > image.extent(1) || left + size > image.extent(2))
    throw Error(Errc::invalid_argument, "stamp_square: square leaves the image");
  Tensor out = image;
  const std::size_t h = image.extent(1), w = image.extent(2);
  auto d = out.data();
  for (std::size_t c = 0; c < image.extent(0); ++c)
    for (std::size_t y = top; y < top + size; ++y)
      for (std::size_t x = left; x < left + size; ++x) d[(c * h + y) * w + x] = value;
  return out;
}

FeatureModel::FeatureModel(std::size_t channels, std::size_t height, std::size_t width,
                           std::size_t feature_dim, std::uint64_t seed)
    : channels_(channels), height_(height), width_(width) {
  if (channels == 0 || height < 2 || width < 2 || feature_dim == 0)
    throw Error(Errc::invalid_argument, "FeatureModel: bad geometry");
  const std::size_t in = channels * (height / 2) * (width / 2);
  weights_ = Matrix(feature_dim, in);
  Rng rng(seed);
  const double scale = 3.0 / std::sqrt(static_cast<double>(in));
  for (auto& v : weights_.data()) v = static_cast<float>(rng.normal() * scale);
}

std::vector<float> FeatureModel::features(const Tensor& image) const {
  if (image.rank() != 3 || image.extent(0) != channels_ || image.extent(1) != height_ ||
      image.extent(2) != width_)
    throw Error(Errc::shape_mismatch, "FeatureModel: image shape differs from the model");
  const std::size_t ph = height_ / 2, pw = width_ / 2;
  const auto d = image.data();
  std::vector<double> pooled(channels_ * ph * pw);
  for (std::size_t c = 0; c < channels_; ++c)
    for (std::size_t y = 0; y < ph; ++y)
      for (std::size_t x = 0; x < pw; ++x) {
        const std::size_t base = (c * height_ + 2 * y) * width_ + 2 * x;
        pooled[(c * ph + y) * pw + x] =
            0.25 * (double{d[base]} + d[base + 1] + d[base + width_] + d[base + width_ + 1]) -
            0.5;
      }
  std::vector<float> out(weights_.rows());
  for (std::size_t f = 0; f < out.size(); ++f) {
    const auto row = weights_.row(f);
    double acc = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) acc += row[i] * pooled[i];
    out[f] = static_cast<float>(std::tanh(acc));
  }
  return out;
}

Matrix FeatureModel::features(const std::vector<Tensor>& images) const {
  Matrix out(images.size(), feature_dim());
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto f = features(images[n]);
    std::copy(f.begin(), f.end(), out.row(n).begin());
  }
  return out;
}

}  // namespace sparse_shield::synthetic
