#include "sparse_shield/outlier.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sparse_shield/error.hpp"
#include "sparse_shield/linalg.hpp"

namespace sparse_shield {

OutlierModel model_from_moments(std::vector<float> mean, Matrix covariance,
                                std::size_t count, double eps2) {
  const std::size_t d = mean.size();
  if (covariance.rows() != d || covariance.cols() != d)
    throw Error(Errc::dimension_mismatch, "outlier model: covariance does not match mean");
  if (count < 2) throw Error(Errc::insufficient_data, "outlier model needs N >= 2");
  OutlierModel model;
  model.mean = std::move(mean);
  model.covariance = std::move(covariance);
  model.count = count;
  model.eps2 = eps2;
  const MatrixD cov = model.covariance.cast<double>();
  model.ridge = std::max(default_ridge(cov), kMinRidge);
  model.precision = sym_inverse(cov, model.ridge);
  return model;
}

OutlierModel fit_moments(const Matrix& samples) {
  const std::size_t n = samples.rows(), d = samples.cols();
  if (n < 2)
    throw Error(Errc::insufficient_data,
                "fit_moments needs at least 2 samples, got " + std::to_string(n));
  std::vector<double> mean(d, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const auto row = samples.row(k);
    for (std::size_t i = 0; i < d; ++i) mean[i] += row[i];
  }
  for (double& m : mean) m /= static_cast<double>(n);

  // Centered data, one contiguous run per dimension.
  std::vector<double> centered(d * n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto row = samples.row(k);
    for (std::size_t i = 0; i < d; ++i) centered[i * n + k] = row[i] - mean[i];
  }
  Matrix cov(d, d);
  const double scale = 1.0 / static_cast<double>(n - 1);
  const auto dims = static_cast<std::ptrdiff_t>(d);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t ii = 0; ii < dims; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const std::span<const double> ci(centered.data() + i * n, n);
    for (std::size_t j = i; j < d; ++j) {
      const std::span<const double> cj(centered.data() + j * n, n);
      cov(i, j) = static_cast<float>(dot(ci, cj) * scale);
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < i; ++j) cov(i, j) = cov(j, i);

  std::vector<float> mean_f(d);
  for (std::size_t i = 0; i < d; ++i) mean_f[i] = static_cast<float>(mean[i]);
  return model_from_moments(std::move(mean_f), std::move(cov), n, 0.0);
}

namespace {

template <class T>
double mahalanobis_impl(const OutlierModel& model, std::span<const T> x) {
  const std::size_t d = model.dim();
  if (x.size() != d)
    throw Error(Errc::dimension_mismatch,
                "mahalanobis: vector has length " + std::to_string(x.size()) +
                    ", model dimension is " + std::to_string(d));
  std::vector<double> diff(d);
  for (std::size_t i = 0; i < d; ++i)
    diff[i] = static_cast<double>(x[i]) - static_cast<double>(model.mean[i]);
  double dist = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const auto row = model.precision.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += row[j] * diff[j];
    dist += diff[i] * s;
  }
  return std::max(dist, 0.0);
}

}  // namespace

double mahalanobis(const OutlierModel& model, std::span<const float> x) {
  return mahalanobis_impl(model, x);
}

double mahalanobis(const OutlierModel& model, std::span<const double> x) {
  return mahalanobis_impl(model, x);
}

double chebyshev_bound(double d, double n, double eps2) {
  if (!(d >= 1.0) || !(n >= 2.0) || !(eps2 > 0.0))
    throw Error(Errc::invalid_argument, "chebyshev_bound needs d >= 1, N >= 2, eps2 > 0");
  const double n2 = n * n;
  return std::min(1.0, d * (n2 - 1.0 + n * eps2) / (n2 * eps2));
}

double image_fpr_bound(double d, double patches, double eps2) {
  if (!(d > 0.0) || !(patches >= 1.0) || !(eps2 > 0.0))
    throw Error(Errc::invalid_argument, "image_fpr_bound needs d > 0, patches >= 1, eps2 > 0");
  const double per_patch = std::min(1.0, d / eps2);
  return -std::expm1(patches * std::log1p(-per_patch));
}

double tune_epsilon(double d, double patches, double target_fpr) {
  if (!(target_fpr > 0.0 && target_fpr < 1.0))
    throw Error(Errc::invalid_argument, "target FPR must lie strictly between 0 and 1");
  if (!(d > 0.0) || !(patches >= 1.0))
    throw Error(Errc::invalid_argument, "tune_epsilon needs d > 0 and patches >= 1");
  const double per_patch = -std::expm1(std::log1p(-target_fpr) / patches);
  return d / per_patch;
}

std::vector<double> row_distances(const OutlierModel& model, const Matrix& rows) {
  if (rows.cols() != model.dim())
    throw Error(Errc::dimension_mismatch, "row_distances: row length differs from model dimension");
  std::vector<double> out(rows.rows());
  const auto n = static_cast<std::ptrdiff_t>(rows.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n; ++k)
    out[static_cast<std::size_t>(k)] = mahalanobis(model, rows.row(static_cast<std::size_t>(k)));
  return out;
}

BinaryMask classify_patches(const OutlierModel& model, const Matrix& residuals,
                            std::size_t grid_y, std::size_t grid_x) {
  if (!(model.eps2 > 0.0))
    throw Error(Errc::invalid_argument, "classify_patches: model has no threshold");
  if (residuals.rows() != grid_y * grid_x)
    throw Error(Errc::dimension_mismatch, "classify_patches: one row per grid cell required");
  const auto dist = row_distances(model, residuals);
  BinaryMask mask(grid_y, grid_x);
  for (std::size_t k = 0; k < dist.size(); ++k)
    mask.set(k / grid_x, k % grid_x, dist[k] >= model.eps2);
  return mask;
}

}  // namespace sparse_shield
