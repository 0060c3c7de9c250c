#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sparse_shield/tensor.hpp"

namespace sparse_shield {

// CLNT layout: "CLNT", u32 LE rank, rank x u64 LE extents, f32 LE payload.
Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const Tensor& t, const std::filesystem::path& path);

std::vector<char> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const char> bytes);

/// Binary PGM (P5) or PPM (P6) with maxval 255.
ImageU8 load_image(const std::filesystem::path& path);
void save_image(const ImageU8& img, const std::filesystem::path& path);

/// Planar [C, H, W] tensor, bytes scaled by 1/255.
Tensor image_to_tensor(const ImageU8& img);
/// Inverse of image_to_tensor: clamps to [0,1] and rounds half up.
ImageU8 tensor_to_image(const Tensor& t);

}  // namespace sparse_shield
