#include "mapex/errors.hpp"

namespace mapex {

const char* errc_name(errc code) {
  switch (code) {
    case errc::parse_failure: return "ParseFailure";
    case errc::validation_failure: return "ValidationFailure";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::serialization_rejected: return "SerializationRejected";
    case errc::io_failure: return "IoFailure";
    case errc::out_of_range: return "OutOfRange";
    case errc::empty_neighborhood: return "EmptyNeighborhood";
    case errc::zero_distance: return "ZeroDistance";
    case errc::singular_block: return "SingularBlock";
    case errc::singular_system: return "SingularSystem";
    case errc::spectrum_cutoff: return "SpectrumCutoff";
    case errc::rank_deficient_sketch: return "RankDeficientSketch";
    case errc::ill_conditioned_basis: return "IllConditionedBasis";
    case errc::no_convergence: return "NoConvergence";
  }
  return "UnknownError";
}

error_group errc_group(errc code) {
  switch (code) {
    case errc::parse_failure:
    case errc::validation_failure:
    case errc::dimension_mismatch:
    case errc::serialization_rejected:
    case errc::io_failure:
    case errc::out_of_range:
      return error_group::input;
    default:
      return error_group::numerical;
  }
}

MapexError::MapexError(errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message),
      code_(code) {}

void fail(errc code, const std::string& message) {
  throw MapexError(code, message);
}

}  // namespace mapex
