#include "mapex/types.hpp"

#include <cmath>

namespace mapex {

void TrainingModel::validate() const {
  if (points.rows() < 1) {
    fail(errc::validation_failure, "model needs at least one training point");
  }
  if (points.cols() < 1 || images.cols() < 1) {
    fail(errc::validation_failure,
         "ambient and embedding dimensions must be at least 1");
  }
  if (points.rows() != images.rows()) {
    fail(errc::validation_failure,
         "points has " + std::to_string(points.rows()) +
             " rows but images has " + std::to_string(images.rows()));
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    fail(errc::validation_failure, "epsilon must be positive and finite");
  }
  if (!(curvature_c > 0.0) || !std::isfinite(curvature_c)) {
    fail(errc::validation_failure, "curvature_c must be positive and finite");
  }
  if (!points.allFinite()) {
    fail(errc::validation_failure, "training points contain non-finite values");
  }
  if (!images.allFinite()) {
    fail(errc::validation_failure, "training images contain non-finite values");
  }
}

const char* weight_kind_name(WeightKind kind) {
  switch (kind) {
    case WeightKind::distance: return "distance";
    case WeightKind::shared_tangent: return "tangent";
    case WeightKind::per_point_tangent: return "tangent-per-point";
  }
  return "unknown";
}

WeightKind parse_weight_kind(const std::string& name) {
  if (name == "distance") return WeightKind::distance;
  if (name == "tangent") return WeightKind::shared_tangent;
  if (name == "tangent-per-point") return WeightKind::per_point_tangent;
  fail(errc::validation_failure,
       "unknown weight scheme '" + name +
           "' (expected distance, tangent, or tangent-per-point)");
}

}  // namespace mapex
