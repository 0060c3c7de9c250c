#include "sparse_shield/parallel.hpp"

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sparse_shield {
namespace {

int initial_threads() noexcept {
  const int env = threads_from_env();
  return env > 0 ? env : 1;
}

std::atomic<int>& thread_setting() noexcept {
  static std::atomic<int> value{initial_threads()};
  return value;
}

}  // namespace

int threads_from_env() noexcept {
  const char* raw = std::getenv("SPARSE_SHIELD_THREADS");
  if (raw == nullptr) return 0;
  int n = 0;
  const char* end = raw + std::strlen(raw);
  const auto [ptr, ec] = std::from_chars(raw, end, n);
  if (ec != std::errc() || ptr != end || n < 1) return 0;
  return n;
}

int num_threads() noexcept { return thread_setting().load(); }

void set_num_threads(int n) noexcept {
  thread_setting().store(n < 1 ? 1 : n);
#ifdef _OPENMP
  omp_set_num_threads(n < 1 ? 1 : n);
#endif
}

}  // namespace sparse_shield
