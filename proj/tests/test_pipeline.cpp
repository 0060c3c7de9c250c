#include <doctest.h>

#include <cmath>

#include "sparse_shield/error.hpp"
#include "sparse_shield/linalg.hpp"
#include "sparse_shield/parallel.hpp"
#include "sparse_shield/pipeline.hpp"
#include "support/fixtures.hpp"

using namespace sparse_shield;

namespace {

struct Built {
  std::vector<Tensor> images;
  Matrix features;
  Defense defense;
  std::vector<StageTiming> timings;
};

const Built& built() {
  static const Built b = [] {
    Built out;
    out.images = fixture::clean_images(80, 1);
    out.features = fixture::feature_model().features(out.images);
    out.defense = build_defense(out.images, out.features, DefenseConfig{}, &out.timings);
    return out;
  }();
  return b;
}

Errc build_error(const std::vector<Tensor>& images, const Matrix& features) {
  try {
    build_defense(images, features, DefenseConfig{});
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::io;
}

}  // namespace

TEST_CASE("defense bundles are well formed") {
  const auto& b = built();
  const auto& dct = b.defense.dct;
  CHECK(dct.kind == AnalyzerKind::dct);
  CHECK_FALSE(dct.projection.has_value());
  CHECK(dct.dictionary.dim() == 48);
  CHECK(dct.input_dim() == 48);
  CHECK(dct.dictionary.size() == 1000);
  CHECK(dct.sparsity == 5);
  CHECK(dct.patches_per_image == 64);
  CHECK(dct.erosion == MorphKernel::square(1));
  CHECK(dct.model.eps2 == doctest::Approx(tune_epsilon(48, 64, 0.05)));
  CHECK(dct.fallback_means.size() == 3);

  const auto& fa = b.defense.feature;
  CHECK(fa.kind == AnalyzerKind::feature);
  REQUIRE(fa.projection.has_value());
  CHECK(fa.projection->rows() == fixture::kFeatureDim);
  CHECK(fa.dictionary.dim() == fa.projection->cols());
  CHECK(fa.sparsity < fa.dictionary.dim());
  CHECK(fa.model.eps2 == doctest::Approx(tune_epsilon(static_cast<double>(fa.dictionary.dim()), 1, 0.05)));

  REQUIRE(b.timings.size() == 4);
  for (const auto& t : b.timings) CHECK(t.seconds >= 0);
}

TEST_CASE("explicit thresholds and morphology come from the config") {
  const auto& b = built();
  DefenseConfig cfg;
  cfg.eps2_dct = 123.0;
  cfg.eps2_feature = 456.0;
  cfg.erosion_kernel = 3;
  cfg.dilation_kernel = 5;
  cfg.dict_cols = 200;
  const Defense d = build_defense(b.images, b.features, cfg);
  CHECK(d.dct.model.eps2 == 123.0);
  CHECK(d.feature.model.eps2 == 456.0);
  CHECK(d.dct.erosion == MorphKernel::square(3));
  CHECK(d.dct.dilation == MorphKernel::square(5));
  CHECK(d.dct.dictionary.size() == 200);
  DefenseConfig bad;
  bad.dct_dim = 16;
  CHECK_THROWS_AS(build_defense(b.images, b.features, bad), Error);
}

TEST_CASE("degenerate corpora are rejected") {
  const auto imgs = fixture::clean_images(2, 3);
  const std::vector<Tensor> same(6, imgs[0]);
  const auto feats = fixture::feature_model().features(fixture::clean_images(6, 4));
  CHECK(build_error(same, feats) == Errc::insufficient_data);
  Matrix same_feats(6, fixture::kFeatureDim);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < fixture::kFeatureDim; ++j) same_feats(i, j) = feats(0, j);
  CHECK(build_error(fixture::clean_images(6, 5), same_feats) == Errc::insufficient_data);
  CHECK(build_error({}, feats) == Errc::insufficient_data);
  std::vector<Tensor> mixed = fixture::clean_images(3, 6);
  mixed.push_back(Tensor({3, 16, 16}));
  CHECK(build_error(mixed, feats) == Errc::shape_mismatch);
}

TEST_CASE("default morphology depends on grid size") {
  CHECK(default_morph_size(8, 8) == 1);
  CHECK(default_morph_size(16, 16) == 3);
  CHECK(default_morph_size(56, 20) == 3);
  CHECK(default_morph_size(56, 15) == 1);
}

TEST_CASE("trigger fixture is flagged and localized") {
  const auto& b = built();
  const auto probes = fixture::clean_images(10, 77);
  int clean_flags = 0;
  for (const auto& img : probes) {
    const DctAnalysis clean = dct_analyze(img, b.defense.dct);
    clean_flags += clean.detected;
    const DctAnalysis hit = dct_analyze(fixture::with_trigger(img), b.defense.dct);
    CHECK(hit.detected);
    bool covers = false;
    for (std::size_t py = 0; py < 8; ++py)
      for (std::size_t px = 0; px < 8; ++px)
        covers |= hit.patch_mask.at(py, px) && fixture::trigger_patch(py, px, 4);
    CHECK(covers);
    CHECK(hit.pixel_mask.height() == 32);
    CHECK(hit.pixel_mask.popcount() == 16 * hit.patch_mask.popcount());
    // Suppression leaves unmasked pixels alone and fills masked ones.
    const Tensor trig = fixture::with_trigger(img);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < 32 * 32; ++i) {
        const float before = trig.data()[c * 1024 + i], after = hit.suppressed.data()[c * 1024 + i];
        if (!hit.pixel_mask[i]) CHECK(after == before);
      }
    CHECK(hit.suppressed.data()[29 * 32 + 29] < 1.0f);
  }
  CHECK(clean_flags <= 2);
}

TEST_CASE("degenerate inputs are well defined") {
  const auto& b = built();
  const DctAnalysis zero = dct_analyze(Tensor({3, 32, 32}), b.defense.dct);
  CHECK(zero.distances.size() == 64);
  const std::vector<float> zf(fixture::kFeatureDim, 0.0f);
  const FeatureAnalysis z = feature_analyze(zf, b.defense.feature);
  CHECK(std::isfinite(z.distance));
  CHECK_THROWS_AS(dct_analyze(Tensor({1, 32, 32}), b.defense.dct), Error);
  CHECK_THROWS_AS(dct_analyze(Tensor({3, 2, 2}), b.defense.dct), Error);
  CHECK_THROWS_AS(feature_analyze(std::vector<float>(5, 0.0f), b.defense.feature), Error);
  CHECK_THROWS_AS(feature_analyze(zf, b.defense.dct), Error);
}

TEST_CASE("feature analyzer: in-distribution, denoising and a perturbation sweep") {
  const auto& b = built();
  const auto& fa = b.defense.feature;
  const auto row = b.features.row(0);
  const FeatureAnalysis in = feature_analyze(row, fa);
  CHECK_FALSE(in.detected);
  CHECK(in.denoised.size() == row.size());
  // Training feature 0 is a dictionary atom direction, so denoising
  // reproduces its projection.
  const Matrix& u = *fa.projection;
  const Matrix ut = u.transposed();
  const auto proj = mvm(ut, row);
  const auto back = mvm(u, std::span<const float>(proj));
  for (std::size_t i = 0; i < row.size(); ++i) CHECK(std::abs(in.denoised[i] - back[i]) < 1e-3);

  // Push along the least-energetic retained direction until flagged.
  const auto dir = u.col(u.cols() - 1);
  bool flagged = false;
  for (double scale = 0.25; scale <= 4096 && !flagged; scale *= 2) {
    std::vector<float> f(row.begin(), row.end());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += static_cast<float>(scale * dir[i]);
    flagged = feature_analyze(f, fa).detected;
  }
  CHECK(flagged);
}

TEST_CASE("decision aggregation and attack success") {
  for (int mask = 0; mask < 8; ++mask) {
    const bool da = mask & 1, fa = mask & 2, match = mask & 4;
    const Verdict v = aggregate(da, fa, {match ? 3 : 4, 3});
    CHECK(v.trojan == (da || fa));
    REQUIRE(v.attack_success.has_value());
    CHECK(*v.attack_success == (!da && !fa && match));
    CHECK(attack_success(da, fa, match) == (!da && !fa && match));
  }
  CHECK_FALSE(aggregate(true, false, {1, std::nullopt}).attack_success.has_value());
}

TEST_CASE("detect combines both analyzers") {
  const auto& b = built();
  const auto fm = fixture::feature_model();
  const Tensor img = fixture::with_trigger(fixture::clean_images(1, 99)[0]);
  const Verdict v = detect(img, fm.features(img), b.defense, {5, 5});
  CHECK(v.d_da);
  CHECK(v.trojan);
  CHECK_FALSE(*v.attack_success);
  CHECK(v.mask_coverage > 0.0);
  CHECK(v.mask_coverage == doctest::Approx(static_cast<double>(v.mask_popcount) / 1024));
}

TEST_CASE("thread count does not change the defense") {
  const auto images = fixture::clean_images(24, 8);
  const Matrix feats = fixture::feature_model().features(images);
  DefenseConfig cfg;
  cfg.dict_cols = 300;
  set_num_threads(1);
  const Defense a = build_defense(images, feats, cfg);
  set_num_threads(3);
  const Defense b = build_defense(images, feats, cfg);
  const auto probe = fixture::with_trigger(fixture::clean_images(1, 9)[0]);
  const DctAnalysis ra = dct_analyze(probe, a.dct);
  const DctAnalysis rb = dct_analyze(probe, b.dct);
  set_num_threads(1);
  CHECK(a.dct.dictionary.atoms() == b.dct.dictionary.atoms());
  CHECK(a.dct.model.covariance == b.dct.model.covariance);
  CHECK(a.feature.model.covariance == b.feature.model.covariance);
  CHECK(*a.feature.projection == *b.feature.projection);
  CHECK(ra.distances == rb.distances);
  CHECK(ra.suppressed == rb.suppressed);
}
