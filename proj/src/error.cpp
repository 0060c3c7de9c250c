#include "sparse_shield/error.hpp"

namespace sparse_shield {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::io: return "io";
    case Errc::bad_magic: return "bad_magic";
    case Errc::truncated: return "truncated";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::unsupported_format: return "unsupported_format";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::rank_deficient: return "rank_deficient";
    case Errc::not_converged: return "not_converged";
    case Errc::singular: return "singular";
    case Errc::insufficient_data: return "insufficient_data";
    case Errc::invalid_config: return "invalid_config";
    case Errc::empty_class: return "empty_class";
  }
  return "unknown";
}

}  // namespace sparse_shield
