#include "sparse_shield/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>

#include "sparse_shield/dct.hpp"
#include "sparse_shield/error.hpp"
#include "sparse_shield/linalg.hpp"
#include "sparse_shield/morphology.hpp"
#include "sparse_shield/parallel.hpp"
#include "sparse_shield/pipeline.hpp"
#include "sparse_shield/rng.hpp"
#include "sparse_shield/sparse_recovery.hpp"
#include "sparse_shield/synthetic.hpp"

namespace sparse_shield {
namespace {

using Clock = std::chrono::steady_clock;

double micros_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
}

// Per-component samples in microseconds, kept in first-insertion order.
class Samples {
 public:
  void add(const std::string& component, double us) {
    auto it = index_.find(component);
    if (it == index_.end()) {
      it = index_.emplace(component, order_.size()).first;
      order_.push_back(component);
      values_.emplace_back();
    }
    values_[it->second].push_back(us);
  }

  std::vector<BenchRow> rows(const std::string& kernel, const std::string& checksum) const {
    std::vector<BenchRow> out;
    for (std::size_t k = 0; k < order_.size(); ++k) {
      const auto& v = values_[k];
      double mean = 0.0;
      for (const double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (const double x : v) var += (x - mean) * (x - mean);
      const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
      out.push_back({kernel, order_[k], mean, sd, v.size(), checksum});
    }
    return out;
  }

 private:
  std::map<std::string, std::size_t> index_;
  std::vector<std::string> order_;
  std::vector<std::vector<double>> values_;
};

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = static_cast<float>(rng.normal());
  return m;
}

Dictionary random_dictionary(std::size_t l, std::size_t m, Rng& rng) {
  Matrix atoms = random_matrix(l, m, rng);
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < l; ++i) s += double{atoms(i, j)} * atoms(i, j);
    const double inv = 1.0 / std::sqrt(s);
    for (std::size_t i = 0; i < l; ++i) atoms(i, j) = static_cast<float>(atoms(i, j) * inv);
  }
  std::vector<std::size_t> ids(m);
  for (std::size_t j = 0; j < m; ++j) ids[j] = j;
  return Dictionary(std::move(atoms), std::move(ids), rng.next());
}

template <class T>
std::string digest_of(const std::vector<T>& v) {
  return digest(v.data(), v.size() * sizeof(T));
}

std::vector<BenchRow> bench_mvm(const BenchOptions& o, Rng& rng) {
  const Matrix a = random_matrix(o.rows, o.cols, rng);
  const Matrix xs = random_matrix(o.batch, o.cols, rng);
  const MvmPlan plan{static_cast<std::size_t>(o.threads), 8};
  Samples s;
  std::vector<float> last;
  for (std::size_t r = 0; r < o.runs; ++r) {
    const auto t0 = Clock::now();
    for (std::size_t b = 0; b < o.batch; ++b) last = mvm(a, xs.row(b), plan);
    s.add("total", micros_since(t0));
  }
  return s.rows("mvm", digest_of(last));
}

std::vector<BenchRow> bench_omp(const BenchOptions& o, Rng& rng) {
  const Dictionary d = random_dictionary(o.rows, o.cols, rng);
  const Matrix xs = random_matrix(o.batch, o.rows, rng);
  Samples s;
  std::vector<double> last;
  for (std::size_t r = 0; r < o.runs; ++r) {
    OmpProfile p;
    for (std::size_t b = 0; b < o.batch; ++b) last = omp(d, xs.row(b), o.sparsity, &p).coefficients;
    s.add("correlate", p.correlate * 1e6);
    s.add("select", p.select * 1e6);
    s.add("qr_update", p.qr_update * 1e6);
    s.add("residual_update", p.residual_update * 1e6);
    s.add("solve", p.solve * 1e6);
    s.add("total", p.total * 1e6);
  }
  return s.rows("omp", digest_of(last));
}

std::vector<BenchRow> bench_qr(const BenchOptions& o, Rng& rng) {
  const std::size_t k = std::min(o.sparsity, o.rows);
  std::vector<std::vector<double>> cols(k, std::vector<double>(o.rows));
  for (auto& c : cols)
    for (auto& v : c) v = rng.normal();
  Samples s;
  std::vector<double> last;
  for (std::size_t r = 0; r < o.runs; ++r) {
    const auto t0 = Clock::now();
    for (std::size_t b = 0; b < o.batch; ++b) {
      IncrementalQr qr(o.rows);
      for (const auto& c : cols) qr.append(c);
      if (b + 1 == o.batch) {
        const MatrixD rm = qr.r_matrix();
        last.assign(rm.data().begin(), rm.data().end());
      }
    }
    s.add("total", micros_since(t0));
  }
  return s.rows("qr", digest_of(last));
}

std::vector<BenchRow> bench_dct(const BenchOptions& o) {
  const DctBasis basis = build_dct_basis(o.patch_size);
  const Tensor img = synthetic::smoothed_noise(3, o.image_size, o.image_size, o.seed);
  Samples s;
  std::vector<float> last;
  for (std::size_t r = 0; r < o.runs; ++r) {
    const auto t0 = Clock::now();
    for (std::size_t b = 0; b < o.batch; ++b) {
      const PatchGrid g = extract_dct(img, basis);
      if (b + 1 == o.batch) last.assign(g.coefficients.data().begin(), g.coefficients.data().end());
    }
    s.add("total", micros_since(t0));
  }
  return s.rows("dct", digest_of(last));
}

// One detection pass split into its stages; setup (building the defense)
// is excluded from timing.
std::vector<BenchRow> bench_defense(const BenchOptions& o) {
  const std::size_t n = 64, c = 3, h = o.image_size;
  std::vector<Tensor> images;
  for (std::size_t i = 0; i < n; ++i)
    images.push_back(synthetic::smoothed_noise(c, h, h, o.seed * 1000003 + i));
  const synthetic::FeatureModel fm(c, h, h, 64, o.seed);
  DefenseConfig cfg;
  cfg.patch_size = o.patch_size;
  cfg.dict_cols = o.cols;
  cfg.sparsity = o.sparsity;
  cfg.seed = o.seed;
  const Defense def = build_defense(images, fm.features(images), cfg);

  const Tensor probe = synthetic::stamp_square(
      synthetic::smoothed_noise(c, h, h, o.seed + 77), h - 5, h - 5, 4);
  const std::vector<float> feature = fm.features(probe);
  const DctBasis basis = build_dct_basis(def.dct.patch_size);
  const Matrix ut = def.feature.projection->transposed();
  const MvmPlan plan{static_cast<std::size_t>(num_threads()), 8};

  Samples s;
  std::vector<float> last;
  for (std::size_t r = 0; r < o.runs; ++r) {
    std::map<std::string, double> acc;
    const auto start = Clock::now();
    for (std::size_t b = 0; b < o.batch; ++b) {
      auto t = Clock::now();
      auto lap = [&](const char* name) {
        const auto now = Clock::now();
        acc[name] += std::chrono::duration<double, std::micro>(now - t).count();
        t = now;
      };
      const PatchGrid grid = extract_dct(probe, basis);
      const Matrix cols = grid.coefficients.transposed();
      lap("dct");
      const auto batch = batch_reconstruct(def.dct.dictionary, cols, def.dct.sparsity);
      lap("sparse_recovery");
      const auto dist = row_distances(def.dct.model, batch.residuals.transposed());
      lap("outlier");
      BinaryMask raw(grid.grid_y, grid.grid_x);
      for (std::size_t k = 0; k < dist.size(); ++k)
        raw.set(k / grid.grid_x, k % grid.grid_x, dist[k] >= def.dct.model.eps2);
      const BinaryMask refined = refine_mask(raw, def.dct.erosion, def.dct.dilation);
      const Tensor cleaned = suppress(
          probe, pad_mask(upsample_mask(refined, def.dct.patch_size), h, h),
          def.dct.fallback_means);
      lap("morphology+suppress");
      const auto projected = mvm(ut, std::span<const float>(feature), plan);
      lap("projection");
      const SparseCode code = omp(def.feature.dictionary, projected, def.feature.sparsity);
      lap("sparse_recovery");
      const double fd = mahalanobis(def.feature.model, std::span<const double>(code.residual));
      lap("outlier");
      if (b + 1 == o.batch) {
        last.assign(cleaned.data().begin(), cleaned.data().end());
        last.push_back(static_cast<float>(fd));
      }
    }
    const double total = micros_since(start);
    for (const char* name :
         {"dct", "sparse_recovery", "outlier", "morphology+suppress", "projection"})
      s.add(name, acc[name]);
    s.add("total", total);
  }
  return s.rows("defense", digest_of(last));
}

}  // namespace

std::string digest(const void* data, std::size_t bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<BenchRow> run_bench(const BenchOptions& o) {
  if (o.runs == 0 || o.batch == 0 || o.rows == 0 || o.cols == 0 || o.threads < 1)
    throw Error(Errc::invalid_argument, "bench: runs, batch, sizes and threads must be positive");
  const int saved = num_threads();
  set_num_threads(o.threads);
  struct Restore {
    int n;
    ~Restore() { set_num_threads(n); }
  } restore{saved};
  Rng rng(o.seed);
  if (o.kernel == "mvm") return bench_mvm(o, rng);
  if (o.kernel == "omp") return bench_omp(o, rng);
  if (o.kernel == "qr") return bench_qr(o, rng);
  if (o.kernel == "dct") return bench_dct(o);
  if (o.kernel == "defense") return bench_defense(o);
  throw Error(Errc::invalid_argument,
              "unknown bench kernel '" + o.kernel + "' (expected mvm, omp, qr, dct or defense)");
}

}  // namespace sparse_shield
