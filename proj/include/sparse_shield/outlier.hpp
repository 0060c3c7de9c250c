#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sparse_shield/mask.hpp"
#include "sparse_shield/matrix.hpp"

namespace sparse_shield {

/// Benign residual statistics. Mean and covariance hold f32-representable
/// values so a model reloaded from disk is identical to the fitted one.
struct OutlierModel {
  std::vector<float> mean;
  Matrix covariance;
  MatrixD precision;  // (covariance + ridge I)^{-1}
  double ridge = 0.0;
  double eps2 = 0.0;
  std::size_t count = 0;

  std::size_t dim() const noexcept { return mean.size(); }
};

/// Sample mean and 1/(N-1) covariance of the rows of `samples` (N x d);
/// precision uses default_ridge, floored at kMinRidge.
OutlierModel fit_moments(const Matrix& samples);

/// Rebuilds the precision for stored moments.
OutlierModel model_from_moments(std::vector<float> mean, Matrix covariance,
                                 std::size_t count, double eps2);

inline constexpr double kMinRidge = 1e-12;

/// (x - mu)^T Sigma^{-1} (x - mu).
double mahalanobis(const OutlierModel& model, std::span<const float> x);
double mahalanobis(const OutlierModel& model, std::span<const double> x);

/// min{1, d (N^2 - 1 + N eps2) / (N^2 eps2)}.
double chebyshev_bound(double d, double n, double eps2);

/// 1 - (1 - d/eps2)^patches: image-level FPR bound.
double image_fpr_bound(double d, double patches, double eps2);

/// Smallest eps2 whose image-level bound meets target_fpr:
/// eps2 = d / (1 - (1 - target_fpr)^(1/patches)).
double tune_epsilon(double d, double patches, double target_fpr);

/// Bit k set iff mahalanobis(row k) >= eps2. `residuals` is
/// (grid_y * grid_x) x d.
BinaryMask classify_patches(const OutlierModel& model, const Matrix& residuals,
                            std::size_t grid_y, std::size_t grid_x);

/// Distances for every row, in parallel.
std::vector<double> row_distances(const OutlierModel& model,
                                  const Matrix& rows);

}  // namespace sparse_shield
