#pragma once

#include <stdexcept>
#include <string>

namespace mapex {

// Every failure the library can raise. Input errors describe malformed or
// inconsistent data handed to us; numerical errors describe computations that
// could not be completed at working precision.
enum class errc {
  // input
  parse_failure,
  validation_failure,
  dimension_mismatch,
  serialization_rejected,
  io_failure,
  out_of_range,
  // numerical
  empty_neighborhood,
  zero_distance,
  singular_block,
  singular_system,
  spectrum_cutoff,
  rank_deficient_sketch,
  ill_conditioned_basis,
  no_convergence,
};

enum class error_group { input, numerical };

const char* errc_name(errc code);
error_group errc_group(errc code);

class MapexError : public std::runtime_error {
 public:
  MapexError(errc code, const std::string& message);
  errc code() const { return code_; }
  error_group group() const { return errc_group(code_); }

 private:
  errc code_;
};

[[noreturn]] void fail(errc code, const std::string& message);

}  // namespace mapex
