#include "sparse_shield/sparse_recovery.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "sparse_shield/error.hpp"

namespace sparse_shield {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Times a block only when profiling is on.
class Lap {
 public:
  explicit Lap(OmpProfile* profile) : on_(profile != nullptr) {
    if (on_) start_ = Clock::now();
  }
  void add_to(double& bucket) {
    if (!on_) return;
    const auto now = Clock::now();
    bucket += std::chrono::duration<double>(now - start_).count();
    start_ = now;
  }

 private:
  bool on_;
  Clock::time_point start_;
};

bool append_atom(OmpState& state, const Dictionary& d, std::size_t atom) {
  const auto a = d.atom(atom);
  const std::vector<double> col(a.begin(), a.end());
  return state.qr.try_append(col);
}

// r <- r - q (q^T r) with the newest orthonormal column.
void update_residual(OmpState& state) {
  const auto q = state.qr.q_col(state.qr.size() - 1);
  const double c = dot(q, state.residual);
  for (std::size_t i = 0; i < q.size(); ++i) state.residual[i] -= c * q[i];
}

}  // namespace

OmpState::OmpState(std::span<const float> x)
    : input(x.begin(), x.end()), qr(x.size()), residual(input) {}

void omp_qr_step(OmpState& state, const Dictionary& d, std::size_t atom) {
  if (atom >= d.size())
    throw Error(Errc::invalid_argument, "omp step: atom index out of range");
  if (state.input.size() != d.dim())
    throw Error(Errc::dimension_mismatch, "omp step: input length differs from atom length");
  if (std::find(state.support.begin(), state.support.end(), atom) != state.support.end())
    throw Error(Errc::invalid_argument, "omp step: atom already selected");
  if (!append_atom(state, d, atom))
    throw Error(Errc::rank_deficient,
                "omp step: atom " + std::to_string(atom) + " lies in the span of the support");
  update_residual(state);
  state.support.push_back(atom);
}

SparseCode omp(const Dictionary& d, std::span<const float> x,
               std::size_t sparsity, OmpProfile* profile) {
  if (x.size() != d.dim())
    throw Error(Errc::dimension_mismatch,
                "omp: input has length " + std::to_string(x.size()) +
                    ", dictionary atoms have " + std::to_string(d.dim()));
  if (sparsity > d.size())
    throw Error(Errc::invalid_argument, "omp: sparsity exceeds dictionary size");

  const auto started = profile ? Clock::now() : Clock::time_point{};
  OmpState state(x);
  SparseCode code;
  const double x_norm = norm2(state.input);
  code.residual_norms.push_back(x_norm);

  const MvmPlan plan{1, 8};
  for (std::size_t it = 0; it < sparsity && x_norm > 0.0; ++it) {
    if (code.residual_norms.back() <= kOmpTolerance * x_norm) break;
    Lap lap(profile);
    const auto p = mvm(d.atoms_by_row(), std::span<const double>(state.residual), plan);
    if (profile) lap.add_to(profile->correlate);

    std::size_t best = 0;
    double best_value = -1.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double v = std::abs(p[j]);
      if (v > best_value) {
        best_value = v;
        best = j;
      }
    }
    const bool repeated =
        std::find(state.support.begin(), state.support.end(), best) != state.support.end();
    if (profile) lap.add_to(profile->select);
    if (repeated) break;

    const bool appended = append_atom(state, d, best);
    if (profile) lap.add_to(profile->qr_update);
    if (!appended) break;

    update_residual(state);
    state.support.push_back(best);
    code.residual_norms.push_back(norm2(state.residual));
    if (profile) lap.add_to(profile->residual_update);
  }

  Lap lap(profile);
  code.coefficients = state.qr.solve(state.input);
  code.reconstruction.assign(d.dim(), 0.0);
  for (std::size_t k = 0; k < state.support.size(); ++k) {
    const auto a = d.atom(state.support[k]);
    for (std::size_t i = 0; i < a.size(); ++i)
      code.reconstruction[i] += code.coefficients[k] * static_cast<double>(a[i]);
  }
  code.support = std::move(state.support);
  code.residual = std::move(state.residual);
  if (profile) {
    lap.add_to(profile->solve);
    profile->total += seconds_since(started);
  }
  return code;
}

BatchReconstruction batch_reconstruct(const Dictionary& d, const Matrix& x,
                                      std::size_t sparsity) {
  if (x.rows() != d.dim())
    throw Error(Errc::dimension_mismatch, "batch_reconstruct: row count differs from atom length");
  if (sparsity > d.size())
    throw Error(Errc::invalid_argument, "batch_reconstruct: sparsity exceeds dictionary size");
  const std::size_t l = x.rows(), n = x.cols();
  BatchReconstruction out{Matrix(l, n), Matrix(l, n), std::vector<std::uint8_t>(n, 0)};
  const auto cols = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t jj = 0; jj < cols; ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    std::vector<float> column(l);
    for (std::size_t i = 0; i < l; ++i) column[i] = x(i, j);
    try {
      const SparseCode code = omp(d, column, sparsity);
      for (std::size_t i = 0; i < l; ++i) {
        out.reconstruction(i, j) = static_cast<float>(code.reconstruction[i]);
        out.residuals(i, j) = static_cast<float>(code.residual[i]);
      }
    } catch (const Error&) {
      out.failed[j] = 1;
      for (std::size_t i = 0; i < l; ++i) {
        out.reconstruction(i, j) = 0.0f;
        out.residuals(i, j) = column[i];
      }
    }
  }
  return out;
}

}  // namespace sparse_shield
