#include "sparse_shield/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "sparse_shield/error.hpp"
#include "sparse_shield/linalg.hpp"
#include "sparse_shield/rng.hpp"
#include "sparse_shield/sparse_recovery.hpp"

namespace sparse_shield {

Dictionary::Dictionary(Matrix atoms, std::vector<std::size_t> source_ids,
                       std::uint64_t seed)
    : atoms_(std::move(atoms)), source_ids_(std::move(source_ids)), seed_(seed) {
  const std::size_t l = atoms_.rows(), m = atoms_.cols();
  if (m == 0 || l == 0) throw Error(Errc::invalid_argument, "dictionary needs at least one atom");
  if (source_ids_.size() != m)
    throw Error(Errc::shape_mismatch, "dictionary: one source id per atom required");
  std::unordered_set<std::size_t> seen(source_ids_.begin(), source_ids_.end());
  if (seen.size() != m) throw Error(Errc::invalid_argument, "dictionary: duplicate source ids");
  by_row_ = atoms_.transposed();
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (const float v : by_row_.row(j)) s += static_cast<double>(v) * v;
    if (std::abs(std::sqrt(s) - 1.0) > 1e-5)
      throw Error(Errc::invalid_argument,
                  "dictionary: atom " + std::to_string(j) + " is not unit norm");
  }
}

std::size_t DictLearnConfig::initial_count() const {
  return init_cols.value_or(std::max<std::size_t>(1, target_cols / 20));
}

void DictLearnConfig::validate() const {
  if (target_cols < 1) throw Error(Errc::invalid_config, "dictionary size must be >= 1");
  const std::size_t m0 = initial_count();
  if (m0 < 1 || m0 > target_cols)
    throw Error(Errc::invalid_config, "initial column count must lie in [1, m]");
  if (growth < 1) throw Error(Errc::invalid_config, "growth must be >= 1");
}

// ---------------------------------------------------------------------------

CssdSampler::CssdSampler(const Matrix& x)
    : dim_(x.rows()),
      n_(x.cols()),
      norms_(n_, 0.0),
      residuals_(n_ * dim_),
      weights_(n_, 0.0),
      selected_flag_(n_, 0) {
  for (std::size_t i = 0; i < dim_; ++i) {
    const auto row = x.row(i);
    for (std::size_t j = 0; j < n_; ++j) residuals_[j * dim_ + i] = row[j];
  }
  for (std::size_t j = 0; j < n_; ++j) {
    norms_[j] = norm2({residuals_.data() + j * dim_, dim_});
    if (norms_[j] > 0.0) {
      weights_[j] = 1.0;
      ++usable_;
    }
  }
}

void CssdSampler::select(std::size_t i) {
  if (i >= n_) throw Error(Errc::invalid_argument, "cssd: column index out of range");
  if (selected_flag_[i]) throw Error(Errc::invalid_argument, "cssd: column already selected");
  if (!(norms_[i] > 0.0)) throw Error(Errc::invalid_argument, "cssd: zero column cannot be selected");
  selected_flag_[i] = 1;
  selected_.push_back(i);
  weights_[i] = 0.0;

  std::span<const double> own(residuals_.data() + i * dim_, dim_);
  const double rn = norm2(own);
  if (rn <= kZeroResidual * norms_[i]) return;  // already in span(D_t)

  std::vector<double> q(own.begin(), own.end());
  for (double& v : q) v /= rn;
  const auto count = static_cast<std::ptrdiff_t>(n_);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t jj = 0; jj < count; ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    if (selected_flag_[j] || !(norms_[j] > 0.0)) continue;
    std::span<double> r(residuals_.data() + j * dim_, dim_);
    const double c = dot(q, r);
    for (std::size_t k = 0; k < dim_; ++k) r[k] -= c * q[k];
    const double w = norm2(r) / norms_[j];
    weights_[j] = w <= kZeroResidual ? 0.0 : w;
  }
  basis_.push_back(std::move(q));
}

// ---------------------------------------------------------------------------

namespace {

std::size_t uniform_unselected(const CssdSampler& sampler,
                               const std::vector<std::uint8_t>& usable,
                               const std::vector<std::uint8_t>& taken, Rng& rng) {
  std::vector<std::size_t> pool;
  for (std::size_t j = 0; j < sampler.columns(); ++j)
    if (usable[j] && !sampler.is_selected(j) && !taken[j]) pool.push_back(j);
  return pool[rng.below(pool.size())];
}

}  // namespace

Dictionary learn_dictionary(const Matrix& x, const DictLearnConfig& cfg) {
  cfg.validate();
  const std::size_t l = x.rows(), m = cfg.target_cols;
  CssdSampler sampler(x);
  if (sampler.usable() < m)
    throw Error(Errc::insufficient_data,
                "dictionary learning needs " + std::to_string(m) +
                    " nonzero columns, data has " + std::to_string(sampler.usable()));

  std::vector<std::uint8_t> usable(x.cols(), 0);
  {
    const auto w = sampler.weights();
    for (std::size_t j = 0; j < x.cols(); ++j) usable[j] = w[j] > 0.0;
  }
  Rng rng(cfg.seed);
  std::vector<std::uint8_t> taken(x.cols(), 0);

  const std::size_t m0 = cfg.initial_count();
  for (std::size_t t = 0; t < m0; ++t)
    sampler.select(uniform_unselected(sampler, usable, taken, rng));

  while (sampler.selected().size() < m) {
    const std::size_t batch = std::min(cfg.growth, m - sampler.selected().size());
    std::vector<double> w(sampler.weights().begin(), sampler.weights().end());
    std::vector<std::size_t> drawn;
    for (std::size_t t = 0; t < batch; ++t) {
      std::size_t pick = rng.categorical(w);
      if (pick == w.size()) pick = uniform_unselected(sampler, usable, taken, rng);
      w[pick] = 0.0;
      taken[pick] = 1;
      drawn.push_back(pick);
    }
    for (const std::size_t j : drawn) {
      taken[j] = 0;
      sampler.select(j);
    }
  }

  const auto& ids = sampler.selected();
  Matrix atoms(l, m);
  for (std::size_t k = 0; k < m; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < l; ++i) s += static_cast<double>(x(i, ids[k])) * x(i, ids[k]);
    const double norm = std::sqrt(s);
    for (std::size_t i = 0; i < l; ++i)
      atoms(i, k) = static_cast<float>(x(i, ids[k]) / norm);
  }
  return Dictionary(std::move(atoms), ids, cfg.seed);
}

double projection_residual(const Matrix& d_t, std::span<const float> x) {
  if (x.size() != d_t.rows())
    throw Error(Errc::dimension_mismatch, "projection_residual: length mismatch");
  std::vector<double> xd(x.begin(), x.end());
  if (d_t.cols() == 0) return norm2(xd);
  const MatrixD d = d_t.cast<double>();
  const auto qr = mgs_qr(d);
  const auto v = ls_solve_qr<double>(qr.q, qr.r, xd);
  for (std::size_t i = 0; i < d.rows(); ++i)
    for (std::size_t j = 0; j < d.cols(); ++j) xd[i] -= d(i, j) * v[j];
  return norm2(xd);
}

std::vector<double> cssd_weights(const Matrix& x,
                                 std::span<const std::size_t> selected) {
  const std::size_t l = x.rows(), n = x.cols();
  auto column = [&](std::size_t j) {
    std::vector<float> c(l);
    for (std::size_t i = 0; i < l; ++i) c[i] = x(i, j);
    return c;
  };
  auto norm_of = [](const std::vector<float>& c) {
    double s = 0.0;
    for (const float v : c) s += static_cast<double>(v) * v;
    return std::sqrt(s);
  };

  std::vector<std::size_t> independent;
  auto subset = [&] {
    Matrix d(l, independent.size());
    for (std::size_t k = 0; k < independent.size(); ++k)
      for (std::size_t i = 0; i < l; ++i) d(i, k) = x(i, independent[k]);
    return d;
  };
  for (const std::size_t j : selected) {
    const auto c = column(j);
    const double norm = norm_of(c);
    if (norm > 0.0 && projection_residual(subset(), c) > kZeroResidual * norm)
      independent.push_back(j);
  }

  const Matrix d = subset();
  std::vector<std::uint8_t> is_selected(n, 0);
  for (const std::size_t j : selected) is_selected[j] = 1;
  std::vector<double> w(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (is_selected[j]) continue;
    const auto c = column(j);
    const double norm = norm_of(c);
    if (!(norm > 0.0)) continue;
    const double ratio = projection_residual(d, c) / norm;
    w[j] = ratio <= kZeroResidual ? 0.0 : ratio;
  }
  return w;
}

ReconstructionStats reconstruction_error_stats(const Dictionary& d,
                                               const Matrix& holdout,
                                               std::size_t sparsity) {
  const auto batch = batch_reconstruct(d, holdout, sparsity);
  ReconstructionStats stats;
  const std::size_t n = holdout.cols();
  if (n == 0) return stats;
  for (std::size_t j = 0; j < n; ++j) {
    double xs = 0.0, rs = 0.0;
    for (std::size_t i = 0; i < holdout.rows(); ++i) {
      xs += static_cast<double>(holdout(i, j)) * holdout(i, j);
      rs += static_cast<double>(batch.residuals(i, j)) * batch.residuals(i, j);
    }
    const double rel = xs > 0.0 ? std::sqrt(rs / xs) : 0.0;
    stats.mean += rel;
    stats.max = std::max(stats.max, rel);
  }
  stats.mean /= static_cast<double>(n);
  return stats;
}

}  // namespace sparse_shield
