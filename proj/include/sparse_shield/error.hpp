#pragma once

#include <stdexcept>
#include <string>

namespace sparse_shield {

enum class Errc {
  io,
  bad_magic,
  truncated,
  shape_mismatch,
  unsupported_format,
  invalid_argument,
  dimension_mismatch,
  rank_deficient,
  not_converged,
  singular,
  insufficient_data,
  invalid_config,
  empty_class,
};

const char* to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace sparse_shield
