#pragma once

namespace sparse_shield {

/// Worker count used by the OpenMP kernels. Defaults to the
/// SPARSE_SHIELD_THREADS environment variable, else 1.
int num_threads() noexcept;
void set_num_threads(int n) noexcept;

/// Reads SPARSE_SHIELD_THREADS; returns 0 when unset or malformed.
int threads_from_env() noexcept;

}  // namespace sparse_shield
