#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sparse_shield/config.hpp"
#include "sparse_shield/dct.hpp"
#include "sparse_shield/dictionary.hpp"
#include "sparse_shield/morphology.hpp"
#include "sparse_shield/outlier.hpp"
#include "sparse_shield/tensor.hpp"

namespace sparse_shield {

enum class AnalyzerKind { dct, feature };

/// One trained analyzer. Feature analyzers carry the SVD projection; DCT
/// analyzers carry patch geometry and the suppression fallback.
struct AnalyzerBundle {
  AnalyzerKind kind = AnalyzerKind::dct;
  Dictionary dictionary;
  std::size_t sparsity = 1;
  OutlierModel model;

  // feature only
  std::optional<Matrix> projection;  // input_dim x r
  std::vector<double> singular_values;

  // dct only
  std::size_t patch_size = 0;
  std::size_t channels = 0;
  std::size_t patches_per_image = 1;
  MorphKernel erosion;
  MorphKernel dilation;
  std::vector<float> fallback_means;

  std::size_t input_dim() const;
  void validate() const;
};

struct Defense {
  AnalyzerBundle dct;
  AnalyzerBundle feature;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

/// Offline construction from unlabeled clean data: images are [C,H,W]
/// tensors of equal shape, features are one row per sample.
Defense build_defense(std::span<const Tensor> clean_images,
                      const Matrix& clean_features, const DefenseConfig& cfg,
                      std::vector<StageTiming>* timings = nullptr);

AnalyzerBundle build_dct_analyzer(std::span<const Tensor> clean_images,
                                  const DefenseConfig& cfg,
                                  std::vector<StageTiming>* timings = nullptr);
AnalyzerBundle build_feature_analyzer(const Matrix& clean_features,
                                      const DefenseConfig& cfg,
                                      std::vector<StageTiming>* timings = nullptr);

/// Patch-grid kernel used when the config leaves the size at 0.
std::size_t default_morph_size(std::size_t grid_y, std::size_t grid_x);

struct DctAnalysis {
  bool detected = false;          // d_DA
  BinaryMask raw_mask;            // patch grid, before morphology
  BinaryMask patch_mask;          // patch grid, after opening
  BinaryMask pixel_mask;          // image size
  std::vector<double> distances;  // per patch
  Tensor suppressed;
};

DctAnalysis dct_analyze(const Tensor& image, const AnalyzerBundle& bundle);

struct FeatureAnalysis {
  bool detected = false;  // d_FA
  double distance = 0.0;
  std::vector<float> denoised;  // same length as the input
};

FeatureAnalysis feature_analyze(std::span<const float> feature,
                                const AnalyzerBundle& bundle);

/// Classification supplied by the external victim model.
struct SamplePrediction {
  int class_id = 0;
  std::optional<int> target_class;
};

struct Verdict {
  bool d_da = false;
  bool d_fa = false;
  bool trojan = false;
  std::optional<bool> attack_success;  // set when a target class is known
  std::size_t mask_popcount = 0;
  double mask_coverage = 0.0;
};

/// S = (1 - d_DA)(1 - d_FA)[M(x) == c_t].
bool attack_success(bool d_da, bool d_fa, bool hits_target) noexcept;

/// OR gate over the analyzer flags, plus the attack-success indicator.
Verdict aggregate(bool d_da, bool d_fa, const SamplePrediction& prediction);

Verdict detect(const Tensor& image, std::span<const float> feature,
               const Defense& defense, const SamplePrediction& prediction);

}  // namespace sparse_shield
