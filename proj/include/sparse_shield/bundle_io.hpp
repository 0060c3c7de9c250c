#pragma once

#include <filesystem>

#include "sparse_shield/pipeline.hpp"

namespace sparse_shield {

/// Writes manifest.json plus CLNT tensors (dictionaries, means,
/// covariances, projection, singular values) into `dir`.
void save_defense(const Defense& defense, const std::filesystem::path& dir);

/// Throws Errc::invalid_config for a missing or inconsistent bundle.
Defense load_defense(const std::filesystem::path& dir);

}  // namespace sparse_shield
