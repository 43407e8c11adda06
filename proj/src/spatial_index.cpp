#include "mapex/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mapex/errors.hpp"

namespace mapex {

namespace {
constexpr int kLeafSize = 16;
}

SpatialIndex::SpatialIndex(Eigen::MatrixXd points) : points_(std::move(points)) {
  if (points_.rows() < 1) {
    fail(errc::validation_failure, "spatial index needs at least one point");
  }
  if (points_.cols() < 1) {
    fail(errc::validation_failure, "spatial index needs dimension at least 1");
  }
  if (!points_.allFinite()) {
    fail(errc::validation_failure, "spatial index points must be finite");
  }
  order_.resize(static_cast<std::size_t>(points_.rows()));
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(static_cast<std::size_t>(2 * points_.rows() / kLeafSize + 4));
  root_ = build(0, static_cast<int>(points_.rows()));
}

int SpatialIndex::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{});
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  int axis = 0;
  double widest = -1.0;
  for (int a = 0; a < points_.cols(); ++a) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int i = begin; i < end; ++i) {
      const double v = points_(order_[i], a);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > widest) {
      widest = hi - lo;
      axis = a;
    }
  }
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](int a, int b) {
                     const double va = points_(a, axis);
                     const double vb = points_(b, axis);
                     return va < vb || (va == vb && a < b);
                   });
  const double split = points_(order_[mid], axis);
  // children are built before the parent fields are written because the
  // recursive calls may reallocate nodes_
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  return id;
}

double SpatialIndex::point_distance(int index, const Eigen::VectorXd& x) const {
  return (points_.row(index).transpose() - x).norm();
}

std::vector<std::pair<double, int>> SpatialIndex::radius_query(
    const Eigen::VectorXd& x, double radius) const {
  if (x.size() != points_.cols()) {
    fail(errc::dimension_mismatch,
         "query has dimension " + std::to_string(x.size()) + " but index has " +
             std::to_string(points_.cols()));
  }
  if (!(radius >= 0.0) || !std::isfinite(radius)) {
    fail(errc::validation_failure, "radius must be nonnegative and finite");
  }
  std::vector<std::pair<double, int>> out;
  search_radius(root_, x, radius, out);
  std::sort(out.begin(), out.end());
  return out;
}

void SpatialIndex::search_radius(int node, const Eigen::VectorXd& x,
                                 double radius,
                                 std::vector<std::pair<double, int>>& out) const {
  const Node& nd = nodes_[node];
  if (nd.left < 0) {
    for (int i = nd.begin; i < nd.end; ++i) {
      const int idx = order_[i];
      const double dist = point_distance(idx, x);
      if (dist <= radius) out.emplace_back(dist, idx);
    }
    return;
  }
  // left holds coordinates <= split, right holds >= split
  const double diff = x(nd.axis) - nd.split;
  if (diff <= radius) search_radius(nd.left, x, radius, out);
  if (-diff <= radius) search_radius(nd.right, x, radius, out);
}

std::pair<double, int> SpatialIndex::nearest(const Eigen::VectorXd& x) const {
  if (x.size() != points_.cols()) {
    fail(errc::dimension_mismatch,
         "query has dimension " + std::to_string(x.size()) + " but index has " +
             std::to_string(points_.cols()));
  }
  if (!x.allFinite()) {
    fail(errc::validation_failure, "query must be finite");
  }
  std::pair<double, int> best{std::numeric_limits<double>::infinity(),
                              std::numeric_limits<int>::max()};
  search_nearest(root_, x, best);
  return best;
}

void SpatialIndex::search_nearest(int node, const Eigen::VectorXd& x,
                                  std::pair<double, int>& best) const {
  const Node& nd = nodes_[node];
  if (nd.left < 0) {
    for (int i = nd.begin; i < nd.end; ++i) {
      const int idx = order_[i];
      const double dist = point_distance(idx, x);
      if (dist < best.first || (dist == best.first && idx < best.second)) {
        best = {dist, idx};
      }
    }
    return;
  }
  const double diff = x(nd.axis) - nd.split;
  const int near = diff < 0.0 ? nd.left : nd.right;
  const int far = diff < 0.0 ? nd.right : nd.left;
  search_nearest(near, x, best);
  // equality kept so equal-distance ties on the far side can win on index
  if (std::abs(diff) <= best.first) search_nearest(far, x, best);
}

double covering_radius(const Eigen::MatrixXd& training,
                       const Eigen::MatrixXd& probes) {
  if (probes.rows() == 0) return 0.0;
  if (training.cols() != probes.cols()) {
    fail(errc::dimension_mismatch,
         "training dimension " + std::to_string(training.cols()) +
             " differs from probe dimension " + std::to_string(probes.cols()));
  }
  const SpatialIndex index(training);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < probes.rows(); ++i) {
    worst = std::max(worst, index.nearest(probes.row(i).transpose()).first);
  }
  return worst;
}

}  // namespace mapex
