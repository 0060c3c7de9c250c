#include "sparse_shield/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>

#include "sparse_shield/error.hpp"

namespace sparse_shield {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw Error(Errc::invalid_config, "config: bad value for " + key + ": '" + value + "'");
  return out;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos)
      view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos)
      throw Error(Errc::invalid_config,
                  "config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key(trim(view.substr(0, eq)));
    const std::string value(trim(view.substr(eq + 1)));
    if (key.empty())
      throw Error(Errc::invalid_config,
                  "config line " + std::to_string(lineno) + ": empty key");
    out[key] = value;
  }
  return out;
}

DefenseConfig parse_config(const std::string& text) {
  DefenseConfig cfg;
  for (const auto& [key, value] : parse_key_values(text)) {
    using Size = std::size_t;
    if (key == "patch_size") cfg.patch_size = parse_number<Size>(key, value);
    else if (key == "dct_dim") cfg.dct_dim = parse_number<Size>(key, value);
    else if (key == "dict_cols") cfg.dict_cols = parse_number<Size>(key, value);
    else if (key == "sparsity") cfg.sparsity = parse_number<Size>(key, value);
    else if (key == "eps2_dct") cfg.eps2_dct = parse_number<double>(key, value);
    else if (key == "feature_dict_cols") cfg.feature_dict_cols = parse_number<Size>(key, value);
    else if (key == "feature_sparsity") cfg.feature_sparsity = parse_number<Size>(key, value);
    else if (key == "eps2_feature") cfg.eps2_feature = parse_number<double>(key, value);
    else if (key == "target_fpr") cfg.target_fpr = parse_number<double>(key, value);
    else if (key == "svd_energy_fraction") cfg.svd_energy_fraction = parse_number<double>(key, value);
    else if (key == "erosion_kernel") cfg.erosion_kernel = parse_number<Size>(key, value);
    else if (key == "dilation_kernel") cfg.dilation_kernel = parse_number<Size>(key, value);
    else if (key == "init_cols") cfg.init_cols = parse_number<Size>(key, value);
    else if (key == "growth") cfg.growth = parse_number<Size>(key, value);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else throw Error(Errc::invalid_config, "config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

DefenseConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

void DefenseConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(Errc::invalid_config, msg); };
  if (patch_size != 4 && patch_size != 8) fail("patch_size must be 4 or 8");
  if (dict_cols < 1 || feature_dict_cols < 1) fail("dictionary size must be >= 1");
  if (sparsity < 1 || feature_sparsity < 1) fail("sparsity must be >= 1");
  if (eps2_dct && !(*eps2_dct > 0.0)) fail("eps2_dct must be > 0");
  if (eps2_feature && !(*eps2_feature > 0.0)) fail("eps2_feature must be > 0");
  if (!(target_fpr > 0.0 && target_fpr < 1.0)) fail("target_fpr must lie in (0, 1)");
  if (!(svd_energy_fraction > 0.0 && svd_energy_fraction <= 1.0))
    fail("svd_energy_fraction must lie in (0, 1]");
  if (erosion_kernel != 0 && erosion_kernel % 2 == 0) fail("erosion_kernel must be odd");
  if (dilation_kernel != 0 && dilation_kernel % 2 == 0) fail("dilation_kernel must be odd");
  if (init_cols && (*init_cols < 1 || *init_cols > dict_cols))
    fail("init_cols must lie in [1, dict_cols]");
  if (growth < 1) fail("growth must be >= 1");
}

}  // namespace sparse_shield
