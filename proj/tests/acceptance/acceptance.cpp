// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "sparse_shield/bench.hpp"
#include "sparse_shield/bundle_io.hpp"
#include "sparse_shield/dct.hpp"
#include "sparse_shield/dictionary.hpp"
#include "sparse_shield/linalg.hpp"
#include "sparse_shield/metrics.hpp"
#include "sparse_shield/outlier.hpp"
#include "sparse_shield/parallel.hpp"
#include "sparse_shield/pipeline.hpp"
#include "sparse_shield/sparse_recovery.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace sparse_shield;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Dictionary unit_dictionary(std::size_t l, std::size_t m, Rng& rng) {
  std::vector<std::size_t> ids(m);
  std::iota(ids.begin(), ids.end(), 0u);
  return Dictionary(oracle::unit_columns(l, m, rng), ids, 0);
}

// 1. QR-based OMP against a normal-equations OMP oracle.
Outcome omp_correctness() {
  const auto t0 = Clock::now();
  Rng rng(1001);
  int done = 0, resampled = 0, support_ok = 0, coef_ok = 0, mono_ok = 0;
  double worst = 0;
  while (done < 100) {
    const Dictionary d = unit_dictionary(48, 96, rng);
    const auto x = oracle::gaussian_vector(48, rng);
    const auto ref = oracle::naive_omp(d.atoms(), x, 5);
    if (ref.top_gap < 1e-3L) {
      ++resampled;
      continue;
    }
    ++done;
    const SparseCode c = omp(d, x, 5);
    if (c.support == ref.support) {
      ++support_ok;
      double diff = 0;
      for (std::size_t k = 0; k < c.coefficients.size(); ++k)
        diff = std::max(diff, static_cast<double>(std::abs(c.coefficients[k] - ref.coefficients[k])));
      worst = std::max(worst, diff);
      coef_ok += diff <= 1e-4;
    }
    bool mono = true;
    for (std::size_t k = 1; k < c.residual_norms.size(); ++k)
      mono &= c.residual_norms[k] <= c.residual_norms[k - 1];
    mono_ok += mono;
  }
  const double secs = seconds_since(t0);
  return {support_ok == 100 && coef_ok == 100 && mono_ok == 100 && secs < 5.0,
          fmt("support %d/100, coefficients %d/100 (max diff %.2e), monotone %d/100, "
              "%d near-ties resampled, %.2f s",
              support_ok, coef_ok, worst, mono_ok, resampled, secs)};
}

// 2. Incremental QR fold and newest-column residual updates.
Outcome incremental_qr() {
  Rng rng(1002);
  const std::size_t l = 64, n = 20;
  const Dictionary d = unit_dictionary(l, n, rng);
  const MatrixD a = d.atoms().cast<double>();
  MatrixD q(l, 0), r(0, 0);
  for (std::size_t j = 0; j < n; ++j) {
    const auto col = a.col(j);
    auto f = qr_append(q, r, std::span<const double>(col));
    q = std::move(f.q);
    r = std::move(f.r);
  }
  const auto batch = mgs_qr(a);
  auto rel = [](const MatrixD& x, const MatrixD& y) {
    long double num = 0, den = 0;
    for (std::size_t i = 0; i < x.data().size(); ++i) {
      num += (x.data()[i] - y.data()[i]) * static_cast<long double>(x.data()[i] - y.data()[i]);
      den += static_cast<long double>(y.data()[i]) * y.data()[i];
    }
    return static_cast<double>(std::sqrt(num / den));
  };
  const double eq = rel(q, batch.q), er = rel(r, batch.r);

  const auto x = oracle::gaussian_vector(l, rng);
  const oracle::Vec xv(x.begin(), x.end());
  OmpState st(x);
  std::vector<std::size_t> chosen;
  double worst = 0;
  for (std::size_t j = 0; j < n; ++j) {
    omp_qr_step(st, d, j);
    chosen.push_back(j);
    const auto cols = oracle::columns(d.atoms(), chosen);
    const auto fit = oracle::multiply(cols, oracle::normal_equations(cols, xv));
    for (std::size_t i = 0; i < l; ++i)
      worst = std::max(worst, static_cast<double>(std::abs(st.residual[i] - (xv[i] - fit[i]))));
  }
  return {eq <= 1e-4 && er <= 1e-4 && worst <= 1e-4,
          fmt("Q rel err %.2e, R rel err %.2e, worst residual diff over %zu steps %.2e", eq, er, n, worst)};
}

// 3. Empirical Chebyshev validity plus the large-N limit.
Outcome chebyshev_validity() {
  Rng rng(1003);
  const std::size_t d = 8, n_fit = 1000, trials = 2000;
  bool ok = true;
  std::string detail;
  for (const char* dist : {"gaussian", "uniform"}) {
    auto draw = [&]() {
      return std::string(dist) == "gaussian" ? rng.normal() : std::sqrt(12.0) * (rng.uniform() - 0.5);
    };
    Matrix fit(n_fit, d);
    for (auto& v : fit.data()) v = static_cast<float>(draw());
    const OutlierModel m = fit_moments(fit);
    for (const double eps2 : {2.0 * d, 10.0 * d, 100.0 * d}) {
      std::size_t out = 0;
      for (std::size_t t = 0; t < trials; ++t) {
        std::vector<float> x(d);
        for (auto& v : x) v = static_cast<float>(draw());
        out += mahalanobis(m, x) >= eps2;
      }
      const double rate = static_cast<double>(out) / trials;
      const double bound = chebyshev_bound(d, n_fit, eps2);
      const double se = std::sqrt(bound * (1 - bound) / trials);
      ok &= rate <= bound + 3 * se;
      detail += fmt("%s eps2=%g rate %.4f <= %.4f; ", dist, eps2, rate, bound + 3 * se);
    }
  }
  double worst_limit = 0;
  for (const double eps2 : {2.0 * d, 10.0 * d, 100.0 * d}) {
    const double lim = std::min(1.0, d / eps2);
    worst_limit = std::max(worst_limit, std::abs(chebyshev_bound(d, 1e9, eps2) - lim));
  }
  worst_limit = std::max(worst_limit, std::abs(chebyshev_bound(4, 1e9, 400) - 0.01));
  ok &= worst_limit <= 1e-6;
  return {ok, detail + fmt("N=1e9 limit error %.2e", worst_limit)};
}

// 4. Tuned epsilon reproduces the target image-level FPR.
Outcome epsilon_round_trip() {
  Rng rng(1004);
  long double worst = 0;
  for (int t = 0; t < 50; ++t) {
    const long double d = 1 + static_cast<long double>(rng.below(600));
    const long double k2 = 1 + static_cast<long double>(rng.below(4096));
    const long double fpr = 1e-4L + 0.5L * rng.uniform();
    const long double eps2 = tune_epsilon(static_cast<double>(d), static_cast<double>(k2), static_cast<double>(fpr));
    const long double back = 1 - std::pow(1 - d / eps2, k2);
    worst = std::max(worst, std::abs(back - fpr));
  }
  return {worst <= 1e-9L, fmt("50 triples, worst |FPR - target| %.2Le", worst)};
}

// 5. DCT basis orthonormality, energy preservation, inversion.
Outcome dct_fidelity() {
  Rng rng(1005);
  double ortho = 0, energy = 0, inverse = 0;
  for (const std::size_t p : {4u, 8u}) {
    const auto b = build_dct_basis(p);
    const std::size_t pp = p * p;
    for (std::size_t r = 0; r < pp; ++r)
      for (std::size_t s = 0; s < pp; ++s) {
        long double acc = 0;
        for (std::size_t t = 0; t < pp; ++t) acc += b.basis(r, t) * b.basis(s, t);
        ortho = std::max(ortho, static_cast<double>(std::abs(acc - (r == s))));
      }
    const Tensor img = oracle::uniform_tensor({3, 64, 64}, rng);
    const auto g = extract_dct(img, b);
    const auto px = img.data();
    for (std::size_t k = 0; k < g.patch_count(); ++k) {
      long double ce = 0, pe = 0;
      for (const float c : g.coefficients.row(k)) ce += static_cast<long double>(c) * c;
      const std::size_t py = k / g.grid_x, pxl = k % g.grid_x;
      for (std::size_t ch = 0; ch < 3; ++ch)
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t j = 0; j < p; ++j) {
            const long double v = px[(ch * 64 + py * p + i) * 64 + pxl * p + j];
            pe += v * v;
          }
      energy = std::max(energy, static_cast<double>(std::abs(ce - pe) / pe));
    }
    const Tensor back = inverse_dct(g, b);
    long double num = 0, den = 0;
    for (std::size_t i = 0; i < img.size(); ++i) {
      num += (back.data()[i] - px[i]) * static_cast<long double>(back.data()[i] - px[i]);
      den += static_cast<long double>(px[i]) * px[i];
    }
    inverse = std::max(inverse, static_cast<double>(std::sqrt(num / den)));
  }
  return {ortho <= 1e-5 && energy <= 1e-4 && inverse <= 1e-4,
          fmt("orthonormality %.2e, energy rel %.2e, inverse rel %.2e", ortho, energy, inverse)};
}

// 6. CSSD zero-probability duplicates and cluster coverage.
Outcome cssd_behavior() {
  const Matrix dup(2, 3, {1, 1, 0, 0, 0, 1});
  CssdSampler s(dup);
  s.select(0);
  const bool zero = s.weights()[1] == 0.0 && s.weights()[2] > 0.0;
  int dup_ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto ids = learn_dictionary(dup, {2, 1, 1, seed}).source_ids();
    dup_ok += std::find(ids.begin(), ids.end(), 2u) != ids.end();
  }
  Rng rng(1006);
  Matrix x(8, 60);
  for (std::size_t j = 0; j < 60; ++j) {
    for (std::size_t i = 0; i < 8; ++i) x(i, j) = static_cast<float>(0.003 * rng.normal());
    x(j / 20, j) += 1.0f;
  }
  int covered = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::set<std::size_t> groups;
    for (const auto id : learn_dictionary(x, {3, 1, 1, seed}).source_ids()) groups.insert(id / 20);
    covered += groups.size() == 3;
  }
  return {zero && dup_ok == 100 && covered >= 95,
          fmt("duplicate weight exactly 0: %s, two-atom draws take the distinct column %d/100, "
              "3-cluster coverage %d/100",
              zero ? "yes" : "no", dup_ok, covered)};
}

// 7. Synthetic end-to-end detection with a white-square trigger.
Outcome synthetic_end_to_end() {
  const auto t0 = Clock::now();
  const auto train = fixture::clean_images(400, 7001);
  const auto model = fixture::feature_model();
  DefenseConfig cfg;  // P=4, l=48 (RGB), m=1000, sparsity 5
  const Defense def = build_defense(train, model.features(train), cfg);
  const auto held = fixture::clean_images(200, 7002);
  std::size_t tp = 0, fp = 0, located = 0;
  for (const auto& img : held) {
    fp += dct_analyze(img, def.dct).detected;
    const DctAnalysis a = dct_analyze(fixture::with_trigger(img), def.dct);
    if (!a.detected) continue;
    ++tp;
    bool hit = false;
    for (std::size_t py = 0; py < a.patch_mask.height(); ++py)
      for (std::size_t px = 0; px < a.patch_mask.width(); ++px)
        hit |= a.patch_mask.at(py, px) && fixture::trigger_patch(py, px, cfg.patch_size);
    located += hit;
  }
  const double tpr = tp / 200.0, fpr = fp / 200.0;
  const double bound = image_fpr_bound(48, static_cast<double>(def.dct.patches_per_image), def.dct.model.eps2);
  const double loc = tp ? static_cast<double>(located) / tp : 0.0;
  const double secs = seconds_since(t0);
  return {def.dct.dictionary.dim() == 48 && def.dct.sparsity == 5 && tpr >= 0.95 &&
              fpr <= 2 * bound && loc >= 0.9 && secs < 120,
          fmt("TPR %.3f, clean FPR %.3f (bound %.3f, eps2 %.1f), mask on trigger %.3f, %.1f s",
              tpr, fpr, bound, def.dct.model.eps2, loc, secs)};
}

// 8. Attack-success truth table and metric identities on a 1000-row manifest.
Outcome metric_identities() {
  int table_ok = 0;
  for (int m = 0; m < 8; ++m) {
    const bool da = m & 1, fa = m & 2, match = m & 4;
    const Verdict v = aggregate(da, fa, {match ? 1 : 2, 1});
    table_ok += v.attack_success == ((1 - da) * (1 - fa) * match == 1) && v.trojan == (da || fa);
  }
  Rng rng(1008);
  nlohmann::json rows = nlohmann::json::array();
  std::vector<std::pair<bool, bool>> decisions;
  for (int i = 0; i < 1000; ++i) {
    const bool trojan = rng.uniform() < 0.4;
    const int label = static_cast<int>(rng.below(43));
    const int pred = trojan ? (rng.uniform() < 0.85 ? 0 : label) : (rng.uniform() < 0.9 ? label : 1);
    rows.push_back({{"image_path", "img.ppm"}, {"feature_path", "f.clnt"}, {"predicted_class", pred},
                    {"true_label", label}, {"is_trojan", trojan}, {"target_class", 0}});
    decisions.emplace_back(rng.uniform() < (trojan ? 0.7 : 0.03), rng.uniform() < (trojan ? 0.5 : 0.03));
  }
  const auto manifest = parse_manifest(rows, ".");
  std::vector<SampleOutcome> outs;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    SampleOutcome s;
    s.is_trojan = manifest[i].is_trojan;
    s.d_da = decisions[i].first;
    s.d_fa = decisions[i].second;
    s.predicted_class = manifest[i].predicted_class;
    s.true_label = manifest[i].true_label;
    s.target_class = manifest[i].target_class;
    outs.push_back(s);
  }
  const DetectionMetrics m = compute_metrics(outs);
  double nt = 0, nc = 0, dat = 0, fat = 0, dac = 0, fac = 0, hit = 0, acc = 0;
  for (const auto& s : outs) {
    if (s.is_trojan) {
      ++nt;
      dat += s.d_da;
      fat += s.d_fa;
      hit += s.predicted_class == s.target_class;
    } else {
      ++nc;
      dac += s.d_da;
      fac += s.d_fa;
      acc += s.predicted_class == s.true_label;
    }
  }
  const double asr = (1 - dat / nt) * (1 - fat / nt) * (hit / nt);
  const double accc = (1 - dac / nc) * (1 - fac / nc) * (acc / nc);
  const double e13 = std::abs(m.asr - asr), e14 = std::abs(m.acc_c - accc);
  return {table_ok == 8 && e13 <= 1e-9 && e14 <= 1e-9,
          fmt("truth table %d/8, ASR err %.1e, ACC-C err %.1e (ASR %.4f counted %.4f)", table_ok, e13, e14,
              m.asr, m.asr_counted)};
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// 9. Learn + detect byte identity across runs and thread counts.
Outcome determinism() {
  const auto images = fixture::clean_images(60, 9001);
  const auto model = fixture::feature_model();
  const Matrix feats = model.features(images);
  const auto probes = fixture::clean_images(5, 9002);
  const fs::path root = fs::temp_directory_path() / "sparse_shield_acceptance";
  fs::remove_all(root);
  std::vector<fs::path> dirs;
  std::vector<std::string> reports;
  for (const int threads : {1, 1, 4}) {
    set_num_threads(threads);
    const fs::path dir = root / ("run" + std::to_string(dirs.size()));
    save_defense(build_defense(images, feats, DefenseConfig{}), dir);
    const Defense loaded = load_defense(dir);
    std::string rep;
    for (const auto& p : probes)
      for (const Tensor& img : {p, fixture::with_trigger(p)}) {
        const DctAnalysis a = dct_analyze(img, loaded.dct);
        const FeatureAnalysis f = feature_analyze(model.features(img), loaded.feature);
        rep += digest(a.suppressed.data().data(), a.suppressed.size() * sizeof(float));
        rep += digest(a.distances.data(), a.distances.size() * sizeof(double));
        rep += digest(f.denoised.data(), f.denoised.size() * sizeof(float));
        rep += fmt("%d%d%.17g;", a.detected, f.detected, f.distance);
      }
    dirs.push_back(dir);
    reports.push_back(rep);
  }
  set_num_threads(1);
  std::size_t files = 0, same = 0;
  for (const auto& e : fs::directory_iterator(dirs[0])) {
    ++files;
    const auto ref = slurp(e.path());
    same += ref == slurp(dirs[1] / e.path().filename()) && ref == slurp(dirs[2] / e.path().filename());
  }
  const bool det_same = reports[0] == reports[1] && reports[0] == reports[2];
  return {files > 0 && same == files && det_same,
          fmt("bundle files identical %zu/%zu (threads 1, 1, 4), detection outputs identical: %s", same,
              files, det_same ? "yes" : "no")};
}

// 10. Sparse recovery dominates per-sample defense latency.
Outcome sparse_recovery_share() {
  BenchOptions o;
  o.kernel = "defense";
  o.rows = 48;
  o.cols = 1000;
  o.sparsity = 5;
  o.patch_size = 4;
  o.image_size = 32;
  o.runs = 100;
  double sparse = 0, total = 0;
  for (const auto& r : run_bench(o)) {
    if (r.component == "sparse_recovery") sparse = r.mean_us;
    if (r.component == "total") total = r.mean_us;
  }
  const double share = total > 0 ? sparse / total : 0.0;
  return {share >= 0.5, fmt("sparse recovery %.1f us of %.1f us per sample (%.1f%%)", sparse, total, 100 * share)};
}

}  // namespace

int main() {
  set_num_threads(1);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"OMP matches normal-equations oracle", omp_correctness},
      {"incremental QR equals batch MGS", incremental_qr},
      {"Chebyshev bound holds empirically", chebyshev_validity},
      {"epsilon tuning round trip", epsilon_round_trip},
      {"DCT fidelity", dct_fidelity},
      {"CSSD selection behavior", cssd_behavior},
      {"synthetic end-to-end trigger detection", synthetic_end_to_end},
      {"metric identities", metric_identities},
      {"determinism across runs and threads", determinism},
      {"sparse recovery dominates latency", sparse_recovery_share},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %2zu %s  %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
