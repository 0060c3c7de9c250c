#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "sparse_shield/pipeline.hpp"

namespace sparse_shield {

struct ManifestEntry {
  std::filesystem::path image_path;
  std::filesystem::path feature_path;
  int predicted_class = 0;
  std::optional<int> predicted_class_after_suppression;
  int true_label = 0;
  bool is_trojan = false;
  int target_class = 0;
};

/// Reads the dataset manifest (a JSON array, or an object with a "samples"
/// array). Relative paths resolve against the manifest's directory.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);
std::vector<ManifestEntry> parse_manifest(const nlohmann::json& doc,
                                          const std::filesystem::path& base);

struct SampleOutcome {
  bool is_trojan = false;
  bool d_da = false;
  bool d_fa = false;
  int predicted_class = 0;
  std::optional<int> predicted_class_after_suppression;
  int true_label = 0;
  int target_class = 0;
  std::size_t mask_popcount = 0;
};

struct DetectionMetrics {
  std::size_t clean_count = 0;
  std::size_t trojan_count = 0;
  double tpr_da = 0.0;
  double tpr_fa = 0.0;
  double fpr_da = 0.0;
  double fpr_fa = 0.0;
  double target_hit_rate = 0.0;  // infected model on trojan samples
  double clean_accuracy = 0.0;   // undefended model on clean samples
  double asr = 0.0;              // (1-TPR_DA)(1-TPR_FA) * hit rate
  double asr_counted = 0.0;      // mean of S_i
  bool asr_divergent = false;
  double acc_c = 0.0;            // (1-FPR_DA)(1-FPR_FA) * clean accuracy
  double acc_c_counted = 0.0;
  double tgr = 0.0;
};

/// Counting rates per class. Throws Errc::empty_class if either the clean
/// or the trojan class is empty.
DetectionMetrics compute_metrics(std::span<const SampleOutcome> samples);

struct DetectionReport {
  std::vector<SampleOutcome> samples;
  DetectionMetrics metrics;
};

DetectionReport evaluate(const Defense& defense,
                         std::span<const ManifestEntry> manifest);

nlohmann::json to_json(const DetectionMetrics& m);
nlohmann::json to_json(const DetectionReport& r);

}  // namespace sparse_shield
