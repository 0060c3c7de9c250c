#include "sparse_shield/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <string>

#include "sparse_shield/error.hpp"
#include "sparse_shield/linalg.hpp"
#include "sparse_shield/parallel.hpp"
#include "sparse_shield/sparse_recovery.hpp"

namespace sparse_shield {
namespace {

using Clock = std::chrono::steady_clock;

class StageTimer {
 public:
  StageTimer(std::vector<StageTiming>* sink, std::string name)
      : sink_(sink), name_(std::move(name)), start_(Clock::now()) {}
  ~StageTimer() {
    if (sink_)
      sink_->push_back({name_, std::chrono::duration<double>(Clock::now() - start_).count()});
  }
  StageTimer(const StageTimer&) = delete;
  StageTimer& operator=(const StageTimer&) = delete;

 private:
  std::vector<StageTiming>* sink_;
  std::string name_;
  Clock::time_point start_;
};

// Distinct nonzero columns, first occurrence order preserved.
Matrix distinct_nonzero_columns(const Matrix& x) {
  std::set<std::vector<float>> seen;
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    auto c = x.col(j);
    if (std::all_of(c.begin(), c.end(), [](float v) { return v == 0.0f; })) continue;
    if (seen.insert(std::move(c)).second) keep.push_back(j);
  }
  Matrix out(x.rows(), keep.size());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t k = 0; k < keep.size(); ++k) out(i, k) = x(i, keep[k]);
  return out;
}

std::size_t distinct_tensors(std::span<const Tensor> items) {
  std::set<std::vector<float>> seen;
  for (const auto& t : items) seen.emplace(t.data().begin(), t.data().end());
  return seen.size();
}

// Stacks per-image patch rows as columns: l x (images * K^2).
Matrix stack_patch_columns(const std::vector<PatchGrid>& grids, std::size_t l) {
  std::size_t total = 0;
  for (const auto& g : grids) total += g.patch_count();
  Matrix out(l, total);
  std::size_t col = 0;
  for (const auto& g : grids)
    for (std::size_t k = 0; k < g.patch_count(); ++k, ++col) {
      const auto row = g.coefficients.row(k);
      for (std::size_t i = 0; i < l; ++i) out(i, col) = row[i];
    }
  return out;
}

// Fits the benign residual model; rejects corpora the dictionary reproduces
// exactly (no residual signal left to model).
OutlierModel fit_residual_model(const Dictionary& dict, const Matrix& columns,
                                std::size_t sparsity, const char* which) {
  const auto batch = batch_reconstruct(dict, columns, sparsity);
  double rel_sum = 0.0;
  std::size_t nonzero = 0;
  for (std::size_t j = 0; j < columns.cols(); ++j) {
    double xs = 0.0, rs = 0.0;
    for (std::size_t i = 0; i < columns.rows(); ++i) {
      xs += static_cast<double>(columns(i, j)) * columns(i, j);
      rs += static_cast<double>(batch.residuals(i, j)) * batch.residuals(i, j);
    }
    if (xs > 0.0) {
      rel_sum += std::sqrt(rs / xs);
      ++nonzero;
    }
  }
  if (nonzero == 0 || rel_sum / static_cast<double>(nonzero) < 1e-5)
    throw Error(Errc::insufficient_data,
                std::string(which) +
                    " analyzer: held-out benign data is reproduced exactly by the "
                    "dictionary; the corpus has too few distinct columns");
  return fit_moments(batch.residuals.transposed());
}

std::size_t effective_sparsity(std::size_t requested, std::size_t dim,
                               std::size_t atoms) {
  return std::min({requested, dim > 0 ? dim - 1 : 0, atoms});
}

void split_even_odd(std::size_t n, std::vector<std::size_t>& even,
                    std::vector<std::size_t>& odd) {
  for (std::size_t i = 0; i < n; ++i) (i % 2 == 0 ? even : odd).push_back(i);
}

}  // namespace

std::size_t default_morph_size(std::size_t grid_y, std::size_t grid_x) {
  return std::min(grid_y, grid_x) >= 16 ? 3 : 1;
}

std::size_t AnalyzerBundle::input_dim() const {
  if (kind == AnalyzerKind::feature) return projection ? projection->rows() : 0;
  return channels * patch_size * patch_size;
}

void AnalyzerBundle::validate() const {
  auto fail = [](const std::string& msg) { throw Error(Errc::invalid_config, msg); };
  if (kind == AnalyzerKind::feature) {
    if (!projection) fail("feature analyzer without projection");
    if (projection->cols() != dictionary.dim())
      fail("feature projection rank differs from dictionary dimension");
  } else {
    if (projection) fail("DCT analyzer must not carry a projection");
    if (patch_size == 0 || channels == 0) fail("DCT analyzer without patch geometry");
    if (dictionary.dim() != channels * patch_size * patch_size)
      fail("DCT dictionary dimension differs from channels * P^2");
    if (fallback_means.size() != channels) fail("DCT analyzer needs one fallback mean per channel");
    erosion.validate();
    dilation.validate();
  }
  if (model.dim() != dictionary.dim()) fail("outlier model dimension differs from dictionary");
  if (sparsity > dictionary.size()) fail("sparsity exceeds dictionary size");
  if (!(model.eps2 > 0.0)) fail("outlier threshold must be positive");
}

AnalyzerBundle build_dct_analyzer(std::span<const Tensor> clean_images,
                                  const DefenseConfig& cfg,
                                  std::vector<StageTiming>* timings) {
  cfg.validate();
  if (clean_images.empty()) throw Error(Errc::insufficient_data, "no clean images");
  const auto& shape = clean_images.front().shape();
  if (shape.size() != 3) throw Error(Errc::shape_mismatch, "clean images must be [C, H, W]");
  for (const auto& img : clean_images)
    if (img.shape() != shape)
      throw Error(Errc::shape_mismatch, "clean images must share one shape");
  if (distinct_tensors(clean_images) < 2)
    throw Error(Errc::insufficient_data,
                "DCT analyzer: need at least 2 distinct clean images (insufficient distinct columns)");

  const std::size_t p = cfg.patch_size, channels = shape[0];
  const std::size_t l = channels * p * p;
  if (cfg.dct_dim && *cfg.dct_dim != l)
    throw Error(Errc::invalid_config,
                "dct_dim " + std::to_string(*cfg.dct_dim) + " does not match channels * P^2 = " +
                    std::to_string(l));
  const DctBasis basis = build_dct_basis(p);

  std::vector<std::size_t> dict_ids, fit_ids;
  split_even_odd(clean_images.size(), dict_ids, fit_ids);

  AnalyzerBundle b;
  b.kind = AnalyzerKind::dct;
  b.patch_size = p;
  b.channels = channels;
  {
    StageTimer timer(timings, "dct-extract+dictionary");
    std::vector<PatchGrid> grids;
    for (const std::size_t i : dict_ids) grids.push_back(extract_dct(clean_images[i], basis));
    b.patches_per_image = grids.front().patch_count();
    const Matrix columns = distinct_nonzero_columns(stack_patch_columns(grids, l));
    if (columns.cols() == 0)
      throw Error(Errc::insufficient_data, "DCT analyzer: clean patches are all zero");
    DictLearnConfig dcfg;
    dcfg.target_cols = std::min(cfg.dict_cols, columns.cols());
    if (cfg.init_cols) dcfg.init_cols = std::min(*cfg.init_cols, dcfg.target_cols);
    dcfg.growth = cfg.growth;
    dcfg.seed = cfg.seed;
    b.dictionary = learn_dictionary(columns, dcfg);
    b.sparsity = effective_sparsity(cfg.sparsity, l, b.dictionary.size());
  }
  {
    StageTimer timer(timings, "dct-moments");
    std::vector<PatchGrid> grids;
    for (const std::size_t i : fit_ids) grids.push_back(extract_dct(clean_images[i], basis));
    b.model = fit_residual_model(b.dictionary, stack_patch_columns(grids, l), b.sparsity, "DCT");
    b.model.eps2 = cfg.eps2_dct.value_or(tune_epsilon(static_cast<double>(l),
                                                      static_cast<double>(b.patches_per_image),
                                                      cfg.target_fpr));
  }

  const std::size_t gy = shape[1] / p, gx = shape[2] / p;
  const std::size_t fallback_k = default_morph_size(gy, gx);
  b.erosion = MorphKernel::square(cfg.erosion_kernel ? cfg.erosion_kernel : fallback_k);
  b.dilation = MorphKernel::square(cfg.dilation_kernel ? cfg.dilation_kernel : fallback_k);

  b.fallback_means.assign(channels, 0.0f);
  const std::size_t plane = shape[1] * shape[2];
  for (std::size_t ch = 0; ch < channels; ++ch) {
    double sum = 0.0;
    for (const auto& img : clean_images) {
      const auto d = img.data();
      for (std::size_t i = 0; i < plane; ++i) sum += d[ch * plane + i];
    }
    b.fallback_means[ch] =
        static_cast<float>(sum / static_cast<double>(plane * clean_images.size()));
  }
  b.validate();
  return b;
}

AnalyzerBundle build_feature_analyzer(const Matrix& clean_features,
                                      const DefenseConfig& cfg,
                                      std::vector<StageTiming>* timings) {
  cfg.validate();
  const std::size_t n = clean_features.rows(), f = clean_features.cols();
  {
    std::set<std::vector<float>> rows;
    for (std::size_t i = 0; i < n; ++i)
      rows.emplace(clean_features.row(i).begin(), clean_features.row(i).end());
    if (rows.size() < 2)
      throw Error(Errc::insufficient_data,
                  "feature analyzer: need at least 2 distinct clean feature vectors");
  }
  std::vector<std::size_t> dict_ids, fit_ids;
  split_even_odd(n, dict_ids, fit_ids);
  auto columns_of = [&](const std::vector<std::size_t>& ids) {
    Matrix x(f, ids.size());
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const auto row = clean_features.row(ids[k]);
      for (std::size_t i = 0; i < f; ++i) x(i, k) = row[i];
    }
    return x;
  };

  AnalyzerBundle b;
  b.kind = AnalyzerKind::feature;
  Matrix projection_t;
  {
    StageTimer timer(timings, "svd+feature-dictionary");
    const Matrix x = columns_of(dict_ids);
    TruncatedSvd svd = truncated_svd(x, cfg.svd_energy_fraction);
    b.projection = std::move(svd.basis);
    for (const double s : svd.singular_values)
      b.singular_values.push_back(static_cast<float>(s));
    projection_t = b.projection->transposed();
    Matrix projected(svd.rank, x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const auto y = mvm(projection_t, std::span<const float>(x.col(j)));
      for (std::size_t i = 0; i < svd.rank; ++i) projected(i, j) = y[i];
    }
    const Matrix columns = distinct_nonzero_columns(projected);
    if (columns.cols() == 0)
      throw Error(Errc::insufficient_data, "feature analyzer: projected features are all zero");
    DictLearnConfig dcfg;
    dcfg.target_cols = std::min(cfg.feature_dict_cols, columns.cols());
    if (cfg.init_cols) dcfg.init_cols = std::min(*cfg.init_cols, dcfg.target_cols);
    dcfg.growth = cfg.growth;
    dcfg.seed = cfg.seed ^ 0x9e3779b97f4a7c15ULL;
    b.dictionary = learn_dictionary(columns, dcfg);
    b.sparsity = effective_sparsity(cfg.feature_sparsity, svd.rank, b.dictionary.size());
  }
  {
    StageTimer timer(timings, "feature-moments");
    const Matrix x = columns_of(fit_ids);
    const std::size_t r = projection_t.rows();
    Matrix projected(r, x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const auto y = mvm(projection_t, std::span<const float>(x.col(j)));
      for (std::size_t i = 0; i < r; ++i) projected(i, j) = y[i];
    }
    b.model = fit_residual_model(b.dictionary, projected, b.sparsity, "feature");
    b.model.eps2 = cfg.eps2_feature.value_or(
        tune_epsilon(static_cast<double>(r), 1.0, cfg.target_fpr));
  }
  b.validate();
  return b;
}

Defense build_defense(std::span<const Tensor> clean_images,
                      const Matrix& clean_features, const DefenseConfig& cfg,
                      std::vector<StageTiming>* timings) {
  Defense d;
  d.dct = build_dct_analyzer(clean_images, cfg, timings);
  d.feature = build_feature_analyzer(clean_features, cfg, timings);
  return d;
}

DctAnalysis dct_analyze(const Tensor& image, const AnalyzerBundle& bundle) {
  if (bundle.kind != AnalyzerKind::dct)
    throw Error(Errc::invalid_argument, "dct_analyze needs a DCT analyzer bundle");
  if (image.rank() != 3 || image.extent(0) != bundle.channels)
    throw Error(Errc::dimension_mismatch,
                "image channels do not match the DCT analyzer (" +
                    std::to_string(bundle.channels) + " expected)");
  const DctBasis basis = build_dct_basis(bundle.patch_size);
  const PatchGrid grid = extract_dct(image, basis);
  const auto batch =
      batch_reconstruct(bundle.dictionary, grid.coefficients.transposed(), bundle.sparsity);
  const Matrix residual_rows = batch.residuals.transposed();

  DctAnalysis out;
  out.distances = row_distances(bundle.model, residual_rows);
  out.raw_mask = BinaryMask(grid.grid_y, grid.grid_x);
  for (std::size_t k = 0; k < out.distances.size(); ++k)
    out.raw_mask.set(k / grid.grid_x, k % grid.grid_x, out.distances[k] >= bundle.model.eps2);
  out.patch_mask = refine_mask(out.raw_mask, bundle.erosion, bundle.dilation);
  out.detected = out.patch_mask.any();
  out.pixel_mask = pad_mask(upsample_mask(out.patch_mask, bundle.patch_size),
                            image.extent(1), image.extent(2));
  out.suppressed = suppress(image, out.pixel_mask, bundle.fallback_means);
  return out;
}

FeatureAnalysis feature_analyze(std::span<const float> feature,
                                const AnalyzerBundle& bundle) {
  if (bundle.kind != AnalyzerKind::feature || !bundle.projection)
    throw Error(Errc::invalid_argument, "feature_analyze needs a feature analyzer bundle");
  const Matrix& u = *bundle.projection;
  if (feature.size() != u.rows())
    throw Error(Errc::dimension_mismatch,
                "feature vector has length " + std::to_string(feature.size()) +
                    ", analyzer expects " + std::to_string(u.rows()));
  const MvmPlan plan{static_cast<std::size_t>(num_threads()), 8};
  const auto projected = mvm(u.transposed(), feature, plan);
  const SparseCode code = omp(bundle.dictionary, projected, bundle.sparsity);

  FeatureAnalysis out;
  out.distance = mahalanobis(bundle.model, std::span<const double>(code.residual));
  out.detected = out.distance >= bundle.model.eps2;
  const auto restored = mvm(u, std::span<const double>(code.reconstruction), plan);
  out.denoised.resize(restored.size());
  std::transform(restored.begin(), restored.end(), out.denoised.begin(),
                 [](double v) { return static_cast<float>(v); });
  return out;
}

bool attack_success(bool d_da, bool d_fa, bool hits_target) noexcept {
  return !d_da && !d_fa && hits_target;
}

Verdict aggregate(bool d_da, bool d_fa, const SamplePrediction& prediction) {
  Verdict v;
  v.d_da = d_da;
  v.d_fa = d_fa;
  v.trojan = d_da || d_fa;
  if (prediction.target_class)
    v.attack_success = attack_success(d_da, d_fa, prediction.class_id == *prediction.target_class);
  return v;
}

Verdict detect(const Tensor& image, std::span<const float> feature,
               const Defense& defense, const SamplePrediction& prediction) {
  const DctAnalysis da = dct_analyze(image, defense.dct);
  const FeatureAnalysis fa = feature_analyze(feature, defense.feature);
  Verdict v = aggregate(da.detected, fa.detected, prediction);
  v.mask_popcount = da.pixel_mask.popcount();
  v.mask_coverage = da.pixel_mask.size() == 0
                        ? 0.0
                        : static_cast<double>(v.mask_popcount) /
                              static_cast<double>(da.pixel_mask.size());
  return v;
}

}  // namespace sparse_shield
