#pragma once

// Serial reference kernels. Each mirrors a parallel kernel's arithmetic
// exactly and exists to check it bit for bit.

#include <cstddef>
#include <span>
#include <vector>

#include "sparse_shield/dct.hpp"
#include "sparse_shield/dictionary.hpp"
#include "sparse_shield/linalg.hpp"
#include "sparse_shield/outlier.hpp"
#include "sparse_shield/sparse_recovery.hpp"

namespace sparse_shield::reference {

std::vector<float> mvm(const Matrix& a, std::span<const float> x,
                       std::size_t simd_width);
PatchGrid extract_dct(const Tensor& image, const DctBasis& basis);
BatchReconstruction batch_reconstruct(const Dictionary& d, const Matrix& x,
                                      std::size_t sparsity);
OutlierModel fit_moments(const Matrix& samples);

}  // namespace sparse_shield::reference
