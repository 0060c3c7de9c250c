#include "sparse_shield/metrics.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "sparse_shield/error.hpp"
#include "sparse_shield/tensor_io.hpp"

namespace sparse_shield {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

template <class T>
T required(const json& obj, const char* key, std::size_t index) {
  if (!obj.contains(key))
    throw Error(Errc::invalid_argument,
                "manifest entry " + std::to_string(index) + " lacks \"" + key + "\"");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::invalid_argument, "manifest entry " + std::to_string(index) +
                                            " has a malformed \"" + key + "\"");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

double ratio(std::size_t num, std::size_t den) {
  return static_cast<double>(num) / static_cast<double>(den);
}

std::vector<float> load_feature(const fs::path& path) {
  const Tensor t = read_tensor(path);
  if (t.rank() == 1 || (t.rank() == 2 && t.extent(0) == 1))
    return {t.data().begin(), t.data().end()};
  throw Error(Errc::shape_mismatch, path.string() + ": feature tensor must be [F] or [1, F]");
}

}  // namespace

std::vector<ManifestEntry> parse_manifest(const json& doc, const fs::path& base) {
  const json* items = &doc;
  if (doc.is_object()) {
    if (!doc.contains("samples"))
      throw Error(Errc::invalid_argument, "manifest object lacks a \"samples\" array");
    items = &doc.at("samples");
  }
  if (!items->is_array()) throw Error(Errc::invalid_argument, "manifest samples must be an array");

  std::vector<ManifestEntry> out;
  out.reserve(items->size());
  for (std::size_t i = 0; i < items->size(); ++i) {
    const json& e = (*items)[i];
    if (!e.is_object())
      throw Error(Errc::invalid_argument, "manifest entry " + std::to_string(i) + " is not an object");
    ManifestEntry m;
    m.image_path = resolve(base, required<std::string>(e, "image_path", i));
    m.feature_path = resolve(base, required<std::string>(e, "feature_path", i));
    m.predicted_class = required<int>(e, "predicted_class", i);
    if (e.contains("predicted_class_after_suppression") &&
        !e.at("predicted_class_after_suppression").is_null())
      m.predicted_class_after_suppression =
          required<int>(e, "predicted_class_after_suppression", i);
    m.true_label = required<int>(e, "true_label", i);
    m.is_trojan = required<bool>(e, "is_trojan", i);
    m.target_class = required<int>(e, "target_class", i);
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<ManifestEntry> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open manifest " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::invalid_argument, path.string() + ": " + e.what());
  }
  return parse_manifest(doc, path.parent_path());
}

DetectionMetrics compute_metrics(std::span<const SampleOutcome> samples) {
  DetectionMetrics m;
  std::size_t da_t = 0, fa_t = 0, da_c = 0, fa_c = 0, hit = 0, correct = 0;
  std::size_t success = 0, accepted_correct = 0, guarded = 0;
  for (const auto& s : samples) {
    if (s.is_trojan) {
      ++m.trojan_count;
      da_t += s.d_da;
      fa_t += s.d_fa;
      const bool hits = s.predicted_class == s.target_class;
      hit += hits;
      success += attack_success(s.d_da, s.d_fa, hits);
      guarded += s.predicted_class_after_suppression.value_or(s.predicted_class) == s.true_label;
    } else {
      ++m.clean_count;
      da_c += s.d_da;
      fa_c += s.d_fa;
      const bool right = s.predicted_class == s.true_label;
      correct += right;
      accepted_correct += !s.d_da && !s.d_fa && right;
    }
  }
  if (m.clean_count == 0 || m.trojan_count == 0)
    throw Error(Errc::empty_class, m.clean_count == 0 ? "no clean samples in the evaluation set"
                                                      : "no trojan samples in the evaluation set");
  m.tpr_da = ratio(da_t, m.trojan_count);
  m.tpr_fa = ratio(fa_t, m.trojan_count);
  m.fpr_da = ratio(da_c, m.clean_count);
  m.fpr_fa = ratio(fa_c, m.clean_count);
  m.target_hit_rate = ratio(hit, m.trojan_count);
  m.clean_accuracy = ratio(correct, m.clean_count);
  m.asr = (1.0 - m.tpr_da) * (1.0 - m.tpr_fa) * m.target_hit_rate;
  m.asr_counted = ratio(success, m.trojan_count);
  m.asr_divergent = std::abs(m.asr - m.asr_counted) > 1e-9;
  m.acc_c = (1.0 - m.fpr_da) * (1.0 - m.fpr_fa) * m.clean_accuracy;
  m.acc_c_counted = ratio(accepted_correct, m.clean_count);
  m.tgr = ratio(guarded, m.trojan_count);
  return m;
}

DetectionReport evaluate(const Defense& defense, std::span<const ManifestEntry> manifest) {
  DetectionReport report;
  report.samples.reserve(manifest.size());
  for (const auto& e : manifest) {
    const Tensor image = image_to_tensor(load_image(e.image_path));
    const std::vector<float> feature = load_feature(e.feature_path);
    const Verdict v = detect(image, feature, defense, {e.predicted_class, e.target_class});
    SampleOutcome s;
    s.is_trojan = e.is_trojan;
    s.d_da = v.d_da;
    s.d_fa = v.d_fa;
    s.predicted_class = e.predicted_class;
    s.predicted_class_after_suppression = e.predicted_class_after_suppression;
    s.true_label = e.true_label;
    s.target_class = e.target_class;
    s.mask_popcount = v.mask_popcount;
    report.samples.push_back(s);
  }
  report.metrics = compute_metrics(report.samples);
  return report;
}

json to_json(const DetectionMetrics& m) {
  return json{{"clean_count", m.clean_count},
              {"trojan_count", m.trojan_count},
              {"tpr_da", m.tpr_da},
              {"tpr_fa", m.tpr_fa},
              {"fpr_da", m.fpr_da},
              {"fpr_fa", m.fpr_fa},
              {"target_hit_rate", m.target_hit_rate},
              {"clean_accuracy", m.clean_accuracy},
              {"asr", m.asr},
              {"asr_counted", m.asr_counted},
              {"asr_divergent", m.asr_divergent},
              {"acc_c", m.acc_c},
              {"acc_c_counted", m.acc_c_counted},
              {"tgr", m.tgr}};
}

json to_json(const DetectionReport& r) {
  json samples = json::array();
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    const auto& s = r.samples[i];
    json row{{"index", i},
             {"is_trojan", s.is_trojan},
             {"d_da", s.d_da},
             {"d_fa", s.d_fa},
             {"trojan", s.d_da || s.d_fa},
             {"mask_popcount", s.mask_popcount},
             {"predicted_class", s.predicted_class},
             {"true_label", s.true_label},
             {"target_class", s.target_class}};
    row["predicted_class_after_suppression"] =
        s.predicted_class_after_suppression ? json(*s.predicted_class_after_suppression) : json();
    if (s.is_trojan)
      row["attack_success"] = attack_success(s.d_da, s.d_fa, s.predicted_class == s.target_class);
    samples.push_back(std::move(row));
  }
  return json{{"metrics", to_json(r.metrics)}, {"samples", std::move(samples)}};
}

}  // namespace sparse_shield
