#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mapex/spatial_index.hpp"
#include "mapex/types.hpp"

namespace mapex {

// Training points within the closed epsilon-ball around x, ascending by
// (distance, index). Throws EmptyNeighborhood when no point qualifies.
Neighborhood find_neighbors(const Eigen::MatrixXd& points,
                            const Eigen::VectorXd& x, double epsilon);
Neighborhood find_neighbors(const SpatialIndex& index, const Eigen::VectorXd& x,
                            double epsilon);

// Distance-only precision blocks I / distance_j^2. Throws ZeroDistance when a
// distance vanishes (callers short-circuit that case before weighting).
std::vector<Eigen::MatrixXd> distance_precisions(
    const std::vector<double>& distances, Eigen::Index embed_dim);

// Centered second-moment matrix of the neighbor images divided by k * eps1^2,
// where k is the number of rows. The d x d form stays well defined for any
// neighborhood size.
Eigen::MatrixXd local_covariance(const Eigen::MatrixXd& neighbor_images,
                                 double eps1);

// Tangent-aware precision blocks: the inverse of
//   distance_j^2 * covariance + (distance_j^4 / curvature_c^4) * I,
// computed by SPD factorization and re-symmetrized. The first overload shares
// one covariance across the neighborhood, the second pairs covariances[j] with
// distances[j]. Throws SingularBlock when a block cannot be factorized.
std::vector<Eigen::MatrixXd> tangent_precisions(
    const Eigen::MatrixXd& covariance, const std::vector<double>& distances,
    double curvature_c);
std::vector<Eigen::MatrixXd> tangent_precisions(
    const std::vector<Eigen::MatrixXd>& covariances,
    const std::vector<double>& distances, double curvature_c);

// Precision-weighted average of the neighbor images,
//   y = (sum_j P_j)^{-1} (sum_j P_j y_j),
// the generalized least-squares solution of the stacked neighbor system.
// Throws SingularSystem when the accumulated precision is not positive
// definite.
Eigen::VectorXd gls_extend(const std::vector<Eigen::MatrixXd>& blocks,
                           const Eigen::MatrixXd& neighbor_images);

// Abnormality of y against the neighborhood:
//   sqrt(sum_j (y - y_j)^T P_j (y - y_j)).
// Rounding can push the accumulated quadratic form a hair below zero; it is
// clamped before the square root.
double mahalanobis_score_squared(const Eigen::VectorXd& y,
                                 const std::vector<Eigen::MatrixXd>& blocks,
                                 const Eigen::MatrixXd& neighbor_images);
double mahalanobis_score(const Eigen::VectorXd& y,
                         const std::vector<Eigen::MatrixXd>& blocks,
                         const Eigen::MatrixXd& neighbor_images);

// One-shot extension of a single query with brute-force neighbor search.
// Behavior, shared with Extender::extend:
//  - a query coinciding with a training point returns that image exactly,
//    with score 0 and neighbor_count 1;
//  - when fewer than embed_dim neighbors fall inside model.epsilon, the radius
//    doubles, at most four times, until the count suffices; the final attempt
//    accepts any nonempty neighborhood;
//  - EmptyNeighborhood if every attempt comes back empty.
ExtensionResult extend(const TrainingModel& model, const Eigen::VectorXd& x,
                       const WeightScheme& scheme);

// Reusable engine for batches of queries: validates the model once, builds the
// spatial index, and precomputes the per-point image covariances used by the
// per-point tangent scheme (each over the model.epsilon-ball around its
// training point).
class Extender {
 public:
  explicit Extender(TrainingModel model);

  ExtensionResult extend(const Eigen::VectorXd& x,
                         const WeightScheme& scheme) const;

  const TrainingModel& model() const { return model_; }
  const SpatialIndex& index() const { return index_; }
  const std::vector<Eigen::MatrixXd>& point_covariances() const {
    return point_covariances_;
  }

 private:
  TrainingModel model_;
  SpatialIndex index_;
  std::vector<Eigen::MatrixXd> point_covariances_;
};

}  // namespace mapex
