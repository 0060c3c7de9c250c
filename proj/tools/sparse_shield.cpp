#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sparse_shield/bench.hpp"
#include "sparse_shield/bundle_io.hpp"
#include "sparse_shield/config.hpp"
#include "sparse_shield/error.hpp"
#include "sparse_shield/metrics.hpp"
#include "sparse_shield/outlier.hpp"
#include "sparse_shield/parallel.hpp"
#include "sparse_shield/pipeline.hpp"
#include "sparse_shield/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sparse_shield;

namespace {

constexpr int kExitTrojan = 1;
constexpr int kExitUsage = 2;

struct Common {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<double> target_fpr;
  bool json = false;
  bool csv = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key=value defense config file");
  cmd->add_option("--seed", c.seed, "RNG seed for dictionary learning");
  cmd->add_option("--threads", c.threads, "worker threads (default: SPARSE_SHIELD_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--target-fpr", c.target_fpr, "image-level false positive target")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_flag("--json", c.json, "machine-readable JSON output");
  cmd->add_flag("--csv", c.csv, "machine-readable CSV output");
}

DefenseConfig resolve_config(const Common& c) {
  DefenseConfig cfg = c.config ? load_config(*c.config) : DefenseConfig{};
  if (c.seed) cfg.seed = *c.seed;
  if (c.target_fpr) cfg.target_fpr = *c.target_fpr;
  cfg.validate();
  return cfg;
}

void apply_threads(const Common& c) {
  const int env = threads_from_env();
  set_num_threads(c.threads ? *c.threads : (env > 0 ? env : 1));
}

std::vector<fs::path> corpus_images(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw Error(Errc::io, "corpus directory not found: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension().string();
    if (entry.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error(Errc::insufficient_data, "no .pgm/.ppm images in " + dir.string());
  return out;
}

Matrix feature_matrix(const fs::path& path) {
  const Tensor t = read_tensor(path);
  if (t.rank() != 2) throw Error(Errc::shape_mismatch, path.string() + ": features must be [N, F]");
  return Matrix(t.extent(0), t.extent(1), {t.data().begin(), t.data().end()});
}

std::vector<float> feature_vector(const fs::path& path) {
  const Tensor t = read_tensor(path);
  if (t.rank() == 1 || (t.rank() == 2 && t.extent(0) == 1)) return {t.data().begin(), t.data().end()};
  throw Error(Errc::shape_mismatch, path.string() + ": feature must be [F] or [1, F]");
}

int cmd_learn(const Common& c, const fs::path& corpus, const fs::path& features,
              const fs::path& out) {
  const DefenseConfig cfg = resolve_config(c);
  apply_threads(c);
  std::vector<Tensor> images;
  for (const auto& p : corpus_images(corpus)) images.push_back(image_to_tensor(load_image(p)));
  const Matrix feats = feature_matrix(features);
  std::vector<StageTiming> timings;
  const Defense defense = build_defense(images, feats, cfg, &timings);
  save_defense(defense, out);
  if (c.json) {
    json stages = json::array();
    for (const auto& t : timings) stages.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
    std::cout << json{{"bundle", out.string()}, {"stages", stages}}.dump() << '\n';
  } else if (c.csv) {
    std::cout << "stage,seconds\n";
    for (const auto& t : timings) std::cout << t.stage << ',' << t.seconds << '\n';
  } else {
    std::printf("%-28s %12s\n", "stage", "seconds");
    for (const auto& t : timings) std::printf("%-28s %12.6f\n", t.stage.c_str(), t.seconds);
  }
  return 0;
}

int cmd_tune_eps(double dim, double patches, double target_fpr) {
  std::printf("%.17g\n", tune_epsilon(dim, patches, target_fpr));
  return 0;
}

int cmd_detect(const Common& c, const fs::path& bundle, const fs::path& image,
               const fs::path& feature, bool exit_on_trojan, const std::optional<fs::path>& cleaned) {
  apply_threads(c);
  const Defense defense = load_defense(bundle);
  const Tensor img = image_to_tensor(load_image(image));
  const auto feat = feature_vector(feature);
  const DctAnalysis da = dct_analyze(img, defense.dct);
  const FeatureAnalysis fa = feature_analyze(feat, defense.feature);
  const Verdict v = aggregate(da.detected, fa.detected, {});
  const double coverage =
      static_cast<double>(da.pixel_mask.popcount()) / static_cast<double>(da.pixel_mask.size());
  if (cleaned) save_image(tensor_to_image(da.suppressed), *cleaned);
  if (c.json) {
    std::cout << json{{"d_da", v.d_da}, {"d_fa", v.d_fa}, {"trojan", v.trojan},
                      {"mask_coverage", coverage}}.dump()
              << '\n';
  } else {
    std::printf("trojan=%s d_da=%s d_fa=%s mask_coverage=%.6f\n", v.trojan ? "true" : "false",
                v.d_da ? "true" : "false", v.d_fa ? "true" : "false", coverage);
  }
  return exit_on_trojan && v.trojan ? kExitTrojan : 0;
}

int cmd_eval(const Common& c, const fs::path& bundle, const fs::path& manifest) {
  apply_threads(c);
  const Defense defense = load_defense(bundle);
  const auto entries = load_manifest(manifest);
  const DetectionReport report = evaluate(defense, entries);
  if (c.csv) {
    const json m = to_json(report.metrics);
    std::string header, values;
    for (const auto& [k, v] : m.items()) {
      header += (header.empty() ? "" : ",") + k;
      values += (values.empty() ? "" : ",") + v.dump();
    }
    std::cout << header << '\n' << values << '\n';
  } else {
    std::cout << to_json(report).dump(c.json ? -1 : 2) << '\n';
  }
  return 0;
}

int cmd_bench(const Common& c, BenchOptions opts) {
  const int env = threads_from_env();
  opts.threads = c.threads ? *c.threads : (env > 0 ? env : 1);
  if (c.seed) opts.seed = *c.seed;
  const auto rows = run_bench(opts);
  if (c.csv) {
    std::cout << "kernel,component,mean_us,stddev_us,runs,checksum\n";
    for (const auto& r : rows)
      std::printf("%s,%s,%.3f,%.3f,%zu,%s\n", r.kernel.c_str(), r.component.c_str(), r.mean_us,
                  r.stddev_us, r.runs, r.checksum.c_str());
  } else if (c.json) {
    json out = json::array();
    for (const auto& r : rows)
      out.push_back({{"kernel", r.kernel}, {"component", r.component}, {"mean_us", r.mean_us},
                     {"stddev_us", r.stddev_us}, {"runs", r.runs}, {"checksum", r.checksum}});
    std::cout << out.dump() << '\n';
  } else {
    std::printf("%-8s %-20s %12s %12s %6s  %s\n", "kernel", "component", "mean_us", "stddev_us",
                "runs", "checksum");
    for (const auto& r : rows)
      std::printf("%-8s %-20s %12.3f %12.3f %6zu  %s\n", r.kernel.c_str(), r.component.c_str(),
                  r.mean_us, r.stddev_us, r.runs, r.checksum.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-recovery Trojan input detection"};
  app.require_subcommand(1);

  Common common;
  fs::path corpus, features, bundle, image, feature, manifest;
  std::optional<fs::path> cleaned;
  bool exit_on_trojan = false;
  double dim = 0.0, patches = 1.0, fpr = 0.05;
  BenchOptions bench;

  auto* learn = app.add_subcommand("learn", "build both analyzers from a clean corpus");
  learn->add_option("corpus", corpus, "directory of clean .pgm/.ppm images")->required();
  learn->add_option("features", features, "CLNT [N, F] clean feature matrix")->required();
  learn->add_option("out", bundle, "output bundle directory")->required();
  add_common(learn, common);

  auto* tune = app.add_subcommand("tune-eps", "threshold for a target image-level FPR");
  tune->add_option("--dim", dim, "vector dimension d")->required()->check(CLI::PositiveNumber);
  tune->add_option("--patches", patches, "patches per image (K^2)")->check(CLI::PositiveNumber);
  tune->add_option("--target-fpr", fpr, "target false positive rate")->required();

  auto* det = app.add_subcommand("detect", "screen one input");
  det->add_option("bundle", bundle, "defense bundle directory")->required();
  det->add_option("image", image, ".pgm/.ppm input")->required();
  det->add_option("feature", feature, "CLNT feature vector")->required();
  det->add_flag("--exit-on-trojan", exit_on_trojan, "exit 1 when a Trojan is flagged");
  det->add_option("--suppressed-out", cleaned, "write the trigger-suppressed image here");
  add_common(det, common);

  auto* ev = app.add_subcommand("eval", "detection metrics over a labelled manifest");
  ev->add_option("bundle", bundle, "defense bundle directory")->required();
  ev->add_option("manifest", manifest, "dataset manifest JSON")->required();
  add_common(ev, common);

  auto* be = app.add_subcommand("bench", "kernel latency over repeated runs");
  be->add_option("--kernel", bench.kernel, "mvm | omp | qr | dct | defense")->required();
  be->add_option("--rows", bench.rows, "matrix / dictionary rows");
  be->add_option("--cols", bench.cols, "matrix / dictionary columns");
  be->add_option("--sparsity", bench.sparsity, "OMP sparsity");
  be->add_option("--patch-size", bench.patch_size, "DCT patch size");
  be->add_option("--image-size", bench.image_size, "square image side");
  be->add_option("--runs", bench.runs, "timed repetitions");
  be->add_option("--batch", bench.batch, "inputs per timed run");
  add_common(be, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*learn) return cmd_learn(common, corpus, features, bundle);
    if (*tune) return cmd_tune_eps(dim, patches, fpr);
    if (*det) return cmd_detect(common, bundle, image, feature, exit_on_trojan, cleaned);
    if (*ev) return cmd_eval(common, bundle, manifest);
    if (*be) return cmd_bench(common, bench);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
