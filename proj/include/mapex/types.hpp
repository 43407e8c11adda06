#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mapex/errors.hpp"

namespace mapex {

// Training data for out-of-sample extension: p ambient points (rows of
// `points`, dimension n) with their precomputed embedding images (rows of
// `images`, dimension d), the neighborhood radius epsilon used when the map
// was built, and the curvature constant consumed by the tangent weight
// schemes.
struct TrainingModel {
  Eigen::MatrixXd points;  // p x n
  Eigen::MatrixXd images;  // p x d
  double epsilon = 0.0;
  double curvature_c = 1.0;

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index ambient_dim() const { return points.cols(); }
  Eigen::Index embed_dim() const { return images.cols(); }

  // Throws ValidationFailure when the row counts disagree, a dimension is
  // zero, epsilon or curvature_c is not positive, or any entry is non-finite.
  void validate() const;
};

enum class WeightKind { distance, shared_tangent, per_point_tangent };

// The curvature constant here is the one actually used by extend(); callers
// normally copy model.curvature_c into it unless overriding.
struct WeightScheme {
  WeightKind kind = WeightKind::distance;
  double curvature_c = 1.0;
};

// Canonical names: "distance", "tangent", "tangent-per-point".
const char* weight_kind_name(WeightKind kind);
WeightKind parse_weight_kind(const std::string& name);  // throws ValidationFailure

// Training points found within a ball around a query, sorted by ascending
// (distance, index). `radius` is the radius that was actually searched.
struct Neighborhood {
  std::vector<int> indices;
  std::vector<double> distances;
  Eigen::VectorXd query;
  double radius = 0.0;

  int size() const { return static_cast<int>(indices.size()); }
};

struct ExtensionResult {
  Eigen::VectorXd embedding;
  double score = 0.0;          // abnormality score (square root form)
  double score_squared = 0.0;  // squared form, kept as a diagnostic
  int neighbor_count = 0;
  double epsilon_used = 0.0;   // radius after any doubling
};

}  // namespace mapex
