#include "sparse_shield/bundle_io.hpp"

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "sparse_shield/error.hpp"
#include "sparse_shield/tensor_io.hpp"

namespace sparse_shield {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kFormat = "sparse-shield-defense";
constexpr int kVersion = 1;

Tensor matrix_tensor(const Matrix& m) {
  return Tensor({m.rows(), m.cols()}, {m.data().begin(), m.data().end()});
}

Tensor vector_tensor(std::span<const float> v) {
  return Tensor({v.size()}, {v.begin(), v.end()});
}

Matrix read_matrix(const fs::path& path) {
  const Tensor t = read_tensor(path);
  if (t.rank() != 2)
    throw Error(Errc::invalid_config, path.string() + ": expected a rank-2 tensor");
  return Matrix(t.extent(0), t.extent(1), {t.data().begin(), t.data().end()});
}

std::vector<float> read_vector(const fs::path& path) {
  const Tensor t = read_tensor(path);
  if (t.rank() != 1)
    throw Error(Errc::invalid_config, path.string() + ": expected a rank-1 tensor");
  return {t.data().begin(), t.data().end()};
}

json write_analyzer(const AnalyzerBundle& b, const fs::path& dir, const std::string& prefix) {
  const std::string dict_file = prefix + "_dictionary.clnt";
  const std::string mean_file = prefix + "_mean.clnt";
  const std::string cov_file = prefix + "_covariance.clnt";
  write_tensor(matrix_tensor(b.dictionary.atoms()), dir / dict_file);
  write_tensor(vector_tensor(b.model.mean), dir / mean_file);
  write_tensor(matrix_tensor(b.model.covariance), dir / cov_file);

  json j{{"sparsity", b.sparsity},
         {"eps2", b.model.eps2},
         {"fit_count", b.model.count},
         {"dictionary", {{"file", dict_file},
                         {"seed", b.dictionary.seed()},
                         {"source_ids", b.dictionary.source_ids()}}},
         {"mean", mean_file},
         {"covariance", cov_file}};
  if (b.kind == AnalyzerKind::feature) {
    const std::string proj_file = prefix + "_projection.clnt";
    const std::string sv_file = prefix + "_singular_values.clnt";
    write_tensor(matrix_tensor(*b.projection), dir / proj_file);
    std::vector<float> sv(b.singular_values.begin(), b.singular_values.end());
    write_tensor(vector_tensor(sv), dir / sv_file);
    j["projection"] = proj_file;
    j["singular_values"] = sv_file;
  } else {
    j["patch_size"] = b.patch_size;
    j["channels"] = b.channels;
    j["patches_per_image"] = b.patches_per_image;
    j["erosion"] = {b.erosion.height, b.erosion.width};
    j["dilation"] = {b.dilation.height, b.dilation.width};
    j["fallback_means"] = b.fallback_means;
  }
  return j;
}

AnalyzerBundle read_analyzer(const json& j, const fs::path& dir, AnalyzerKind kind) {
  AnalyzerBundle b;
  b.kind = kind;
  b.dictionary = Dictionary(read_matrix(dir / j.at("dictionary").at("file").get<std::string>()),
                            j.at("dictionary").at("source_ids").get<std::vector<std::size_t>>(),
                            j.at("dictionary").at("seed").get<std::uint64_t>());
  b.sparsity = j.at("sparsity").get<std::size_t>();
  b.model = model_from_moments(read_vector(dir / j.at("mean").get<std::string>()),
                               read_matrix(dir / j.at("covariance").get<std::string>()),
                               j.at("fit_count").get<std::size_t>(), j.at("eps2").get<double>());
  if (kind == AnalyzerKind::feature) {
    b.projection = read_matrix(dir / j.at("projection").get<std::string>());
    for (const float s : read_vector(dir / j.at("singular_values").get<std::string>()))
      b.singular_values.push_back(s);
  } else {
    b.patch_size = j.at("patch_size").get<std::size_t>();
    b.channels = j.at("channels").get<std::size_t>();
    b.patches_per_image = j.at("patches_per_image").get<std::size_t>();
    const auto ero = j.at("erosion").get<std::vector<std::size_t>>();
    const auto dil = j.at("dilation").get<std::vector<std::size_t>>();
    if (ero.size() != 2 || dil.size() != 2)
      throw Error(Errc::invalid_config, "morphology kernels must be [height, width]");
    b.erosion = {ero[0], ero[1]};
    b.dilation = {dil[0], dil[1]};
    b.fallback_means = j.at("fallback_means").get<std::vector<float>>();
  }
  b.validate();
  return b;
}

}  // namespace

void save_defense(const Defense& defense, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::io, "cannot create " + dir.string() + ": " + ec.message());
  const json manifest{{"format", kFormat},
                      {"version", kVersion},
                      {"dct", write_analyzer(defense.dct, dir, "dct")},
                      {"feature", write_analyzer(defense.feature, dir, "feature")}};
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
  if (!out) throw Error(Errc::io, "short write on " + (dir / "manifest.json").string());
}

Defense load_defense(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw Error(Errc::invalid_config, "no defense bundle at " + dir.string());
  try {
    const json manifest = json::parse(in);
    if (manifest.value("format", std::string()) != kFormat ||
        manifest.value("version", 0) != kVersion)
      throw Error(Errc::invalid_config, path.string() + ": unrecognized bundle format");
    Defense d;
    d.dct = read_analyzer(manifest.at("dct"), dir, AnalyzerKind::dct);
    d.feature = read_analyzer(manifest.at("feature"), dir, AnalyzerKind::feature);
    return d;
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_config, path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::invalid_config) throw;
    throw Error(Errc::invalid_config, std::string("defense bundle: ") + e.what());
  }
}

}  // namespace sparse_shield
