#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace mapex {

// Exact kd-tree over a fixed point set. Splits use the widest-extent axis and
// a (coordinate, index) total order, so construction is deterministic and
// duplicate points are handled cleanly. Queries return exactly the sets a
// linear scan would.
class SpatialIndex {
 public:
  explicit SpatialIndex(Eigen::MatrixXd points);

  // All points with distance(point, x) <= radius, sorted by (distance, index).
  std::vector<std::pair<double, int>> radius_query(const Eigen::VectorXd& x,
                                                   double radius) const;

  // Closest point to x; ties resolve to the smallest index.
  std::pair<double, int> nearest(const Eigen::VectorXd& x) const;

  Eigen::Index size() const { return points_.rows(); }
  Eigen::Index dim() const { return points_.cols(); }
  const Eigen::MatrixXd& points() const { return points_; }

 private:
  struct Node {
    int left = -1;
    int right = -1;
    int begin = 0;  // leaf range into order_ when left < 0
    int end = 0;
    int axis = 0;
    double split = 0.0;
  };

  int build(int begin, int end);
  void search_radius(int node, const Eigen::VectorXd& x, double radius,
                     std::vector<std::pair<double, int>>& out) const;
  void search_nearest(int node, const Eigen::VectorXd& x,
                      std::pair<double, int>& best) const;
  double point_distance(int index, const Eigen::VectorXd& x) const;

  Eigen::MatrixXd points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

// Largest distance from any probe row to its nearest training row, i.e. the
// smallest delta for which the training set is a delta-net of the probes.
double covering_radius(const Eigen::MatrixXd& training,
                       const Eigen::MatrixXd& probes);

}  // namespace mapex
