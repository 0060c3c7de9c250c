#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace sparse_shield {

struct BenchOptions {
  std::string kernel = "omp";  // mvm | omp | qr | dct | defense
  std::size_t rows = 48;       // l (dictionary/matrix rows)
  std::size_t cols = 1000;     // m (dictionary/matrix columns)
  std::size_t sparsity = 5;
  std::size_t patch_size = 4;
  std::size_t image_size = 32;
  std::size_t runs = 100;
  std::size_t batch = 1;
  int threads = 1;
  std::uint64_t seed = 1;
};

struct BenchRow {
  std::string kernel;
  std::string component;  // "total" for the whole call
  double mean_us = 0.0;
  double stddev_us = 0.0;
  std::size_t runs = 0;
  std::string checksum;  // hex digest of the kernel output
};

/// Times the kernel over `runs` repetitions. Throws Errc::invalid_argument
/// for an unknown kernel.
std::vector<BenchRow> run_bench(const BenchOptions& options);

/// FNV-1a digest over raw bytes, hex encoded.
std::string digest(const void* data, std::size_t bytes);

}  // namespace sparse_shield
