#include "mapex/extend.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>

namespace mapex {

namespace {

constexpr int kMaxRadiusDoublings = 4;

Neighborhood from_hits(std::vector<std::pair<double, int>> hits,
                       const Eigen::VectorXd& x, double radius) {
  Neighborhood nb;
  nb.query = x;
  nb.radius = radius;
  nb.indices.reserve(hits.size());
  nb.distances.reserve(hits.size());
  for (const auto& [dist, idx] : hits) {
    nb.distances.push_back(dist);
    nb.indices.push_back(idx);
  }
  return nb;
}

Neighborhood collect_brute(const Eigen::MatrixXd& points,
                           const Eigen::VectorXd& x, double radius) {
  std::vector<std::pair<double, int>> hits;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double dist = (points.row(i).transpose() - x).norm();
    if (dist <= radius) hits.emplace_back(dist, static_cast<int>(i));
  }
  std::sort(hits.begin(), hits.end());
  return from_hits(std::move(hits), x, radius);
}

void check_query_shape(const Eigen::MatrixXd& points, const Eigen::VectorXd& x) {
  if (points.rows() < 1) {
    fail(errc::validation_failure, "need at least one training point");
  }
  if (x.size() != points.cols()) {
    fail(errc::dimension_mismatch,
         "query has dimension " + std::to_string(x.size()) +
             " but training points have dimension " +
             std::to_string(points.cols()));
  }
  if (!x.allFinite()) {
    fail(errc::validation_failure, "query has non-finite coordinates");
  }
}

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    fail(errc::validation_failure, "epsilon must be positive and finite");
  }
}

void check_symmetric(const Eigen::MatrixXd& m, const char* label) {
  if (m.rows() != m.cols()) {
    fail(errc::validation_failure,
         std::string(label) + " must be square, got " +
             std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    fail(errc::validation_failure,
         std::string(label) + " is not symmetric within tolerance");
  }
}

Eigen::MatrixXd invert_spd_block(const Eigen::MatrixXd& w, int neighbor) {
  const Eigen::Index d = w.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(w);
  if (llt.info() != Eigen::Success) {
    fail(errc::singular_block,
         "weight block for neighbor " + std::to_string(neighbor) +
             " is not positive definite");
  }
  Eigen::MatrixXd p = llt.solve(Eigen::MatrixXd::Identity(d, d));
  return 0.5 * (p + p.transpose());
}

Eigen::MatrixXd tangent_block(const Eigen::MatrixXd& covariance, double dist,
                              double curvature_c, int neighbor) {
  if (dist == 0.0) {
    fail(errc::zero_distance,
         "zero distance to neighbor " + std::to_string(neighbor));
  }
  const double d2 = dist * dist;
  const double reg = d2 * d2 / (curvature_c * curvature_c * curvature_c * curvature_c);
  Eigen::MatrixXd w = d2 * covariance;
  w.diagonal().array() += reg;
  return invert_spd_block(w, neighbor);
}

void check_tangent_inputs(const std::vector<double>& distances,
                          double curvature_c) {
  if (!(curvature_c > 0.0) || !std::isfinite(curvature_c)) {
    fail(errc::validation_failure, "curvature_c must be positive and finite");
  }
  for (double dist : distances) {
    if (!(dist >= 0.0) || !std::isfinite(dist)) {
      fail(errc::validation_failure,
           "distances must be nonnegative and finite");
    }
  }
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& source,
                            const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), source.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = source.row(rows[i]);
  }
  return out;
}

// Shared driver for the one-shot and indexed extension paths. `collect` runs
// the radius search, `point_cov` supplies the per-point image covariance for
// the per-point tangent scheme.
ExtensionResult extend_core(
    const TrainingModel& model, const Eigen::VectorXd& x,
    const WeightScheme& scheme,
    const std::function<Neighborhood(double)>& collect,
    const std::function<Eigen::MatrixXd(int)>& point_cov) {
  check_query_shape(model.points, x);
  const Eigen::Index d = model.embed_dim();

  double radius = model.epsilon;
  Neighborhood nb;
  bool usable = false;
  for (int attempt = 0; attempt <= kMaxRadiusDoublings; ++attempt) {
    nb = collect(radius);
    const int k = nb.size();
    if (k >= 1 && nb.distances.front() == 0.0) {
      // the query coincides with a training point: reproduce its image
      ExtensionResult res;
      res.embedding = model.images.row(nb.indices.front()).transpose();
      res.score = 0.0;
      res.score_squared = 0.0;
      res.neighbor_count = 1;
      res.epsilon_used = radius;
      return res;
    }
    if (k >= d) {
      usable = true;
      break;
    }
    if (attempt == kMaxRadiusDoublings) {
      usable = k >= 1;
      break;
    }
    radius *= 2.0;
  }
  if (!usable) {
    fail(errc::empty_neighborhood,
         "no training points within radius " + std::to_string(radius) +
             " of the query after " + std::to_string(kMaxRadiusDoublings) +
             " doublings");
  }

  const int k = nb.size();
  const Eigen::MatrixXd neighbor_images = gather_rows(model.images, nb.indices);

  std::vector<Eigen::MatrixXd> blocks;
  switch (scheme.kind) {
    case WeightKind::distance:
      blocks = distance_precisions(nb.distances, d);
      break;
    case WeightKind::shared_tangent: {
      const Eigen::MatrixXd cov = local_covariance(neighbor_images, nb.radius);
      blocks = tangent_precisions(cov, nb.distances, scheme.curvature_c);
      break;
    }
    case WeightKind::per_point_tangent: {
      std::vector<Eigen::MatrixXd> covs;
      covs.reserve(static_cast<std::size_t>(k));
      for (int i = 0; i < k; ++i) covs.push_back(point_cov(nb.indices[i]));
      blocks = tangent_precisions(covs, nb.distances, scheme.curvature_c);
      break;
    }
  }

  ExtensionResult res;
  res.embedding = gls_extend(blocks, neighbor_images);
  res.score_squared =
      mahalanobis_score_squared(res.embedding, blocks, neighbor_images);
  res.score = std::sqrt(res.score_squared);
  res.neighbor_count = k;
  res.epsilon_used = radius;
  return res;
}

const Eigen::MatrixXd& checked_points(const TrainingModel& model) {
  model.validate();
  return model.points;
}

}  // namespace

Neighborhood find_neighbors(const Eigen::MatrixXd& points,
                            const Eigen::VectorXd& x, double epsilon) {
  check_query_shape(points, x);
  check_epsilon(epsilon);
  Neighborhood nb = collect_brute(points, x, epsilon);
  if (nb.indices.empty()) {
    fail(errc::empty_neighborhood,
         "no training points within radius " + std::to_string(epsilon));
  }
  return nb;
}

Neighborhood find_neighbors(const SpatialIndex& index, const Eigen::VectorXd& x,
                            double epsilon) {
  check_epsilon(epsilon);
  Neighborhood nb = from_hits(index.radius_query(x, epsilon), x, epsilon);
  if (nb.indices.empty()) {
    fail(errc::empty_neighborhood,
         "no training points within radius " + std::to_string(epsilon));
  }
  return nb;
}

std::vector<Eigen::MatrixXd> distance_precisions(
    const std::vector<double>& distances, Eigen::Index embed_dim) {
  if (embed_dim < 1) {
    fail(errc::validation_failure, "embed_dim must be at least 1");
  }
  std::vector<Eigen::MatrixXd> out;
  out.reserve(distances.size());
  for (std::size_t j = 0; j < distances.size(); ++j) {
    const double dist = distances[j];
    if (dist == 0.0) {
      fail(errc::zero_distance,
           "zero distance at neighbor " + std::to_string(j));
    }
    if (!(dist > 0.0) || !std::isfinite(dist)) {
      fail(errc::validation_failure, "distances must be positive and finite");
    }
    out.push_back(Eigen::MatrixXd::Identity(embed_dim, embed_dim) /
                  (dist * dist));
  }
  return out;
}

Eigen::MatrixXd local_covariance(const Eigen::MatrixXd& neighbor_images,
                                 double eps1) {
  if (neighbor_images.rows() < 1) {
    fail(errc::validation_failure, "need at least one neighbor image");
  }
  if (!(eps1 > 0.0) || !std::isfinite(eps1)) {
    fail(errc::validation_failure, "eps1 must be positive and finite");
  }
  const double k = static_cast<double>(neighbor_images.rows());
  const Eigen::RowVectorXd mean = neighbor_images.colwise().mean();
  const Eigen::MatrixXd centered = neighbor_images.rowwise() - mean;
  return (centered.transpose() * centered) / (k * eps1 * eps1);
}

std::vector<Eigen::MatrixXd> tangent_precisions(
    const Eigen::MatrixXd& covariance, const std::vector<double>& distances,
    double curvature_c) {
  check_symmetric(covariance, "covariance");
  check_tangent_inputs(distances, curvature_c);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(distances.size());
  for (std::size_t j = 0; j < distances.size(); ++j) {
    out.push_back(tangent_block(covariance, distances[j], curvature_c,
                                static_cast<int>(j)));
  }
  return out;
}

std::vector<Eigen::MatrixXd> tangent_precisions(
    const std::vector<Eigen::MatrixXd>& covariances,
    const std::vector<double>& distances, double curvature_c) {
  if (covariances.size() != distances.size()) {
    fail(errc::validation_failure,
         std::to_string(covariances.size()) + " covariances for " +
             std::to_string(distances.size()) + " distances");
  }
  check_tangent_inputs(distances, curvature_c);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(distances.size());
  for (std::size_t j = 0; j < distances.size(); ++j) {
    check_symmetric(covariances[j], "covariance");
    out.push_back(tangent_block(covariances[j], distances[j], curvature_c,
                                static_cast<int>(j)));
  }
  return out;
}

Eigen::VectorXd gls_extend(const std::vector<Eigen::MatrixXd>& blocks,
                           const Eigen::MatrixXd& neighbor_images) {
  const Eigen::Index k = neighbor_images.rows();
  const Eigen::Index d = neighbor_images.cols();
  if (k < 1) {
    fail(errc::validation_failure, "need at least one neighbor");
  }
  if (static_cast<Eigen::Index>(blocks.size()) != k) {
    fail(errc::validation_failure,
         std::to_string(blocks.size()) + " precision blocks for " +
             std::to_string(k) + " neighbor images");
  }
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::MatrixXd& p = blocks[static_cast<std::size_t>(j)];
    if (p.rows() != d || p.cols() != d) {
      fail(errc::dimension_mismatch,
           "precision block " + std::to_string(j) + " is " +
               std::to_string(p.rows()) + "x" + std::to_string(p.cols()) +
               ", expected " + std::to_string(d) + "x" + std::to_string(d));
    }
    total += p;
    rhs += p * neighbor_images.row(j).transpose();
  }
  if (!total.allFinite()) {
    fail(errc::singular_system, "accumulated precision is not finite");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(total);
  if (llt.info() != Eigen::Success) {
    fail(errc::singular_system,
         "accumulated precision matrix is not positive definite");
  }
  return llt.solve(rhs);
}

double mahalanobis_score_squared(const Eigen::VectorXd& y,
                                 const std::vector<Eigen::MatrixXd>& blocks,
                                 const Eigen::MatrixXd& neighbor_images) {
  const Eigen::Index k = neighbor_images.rows();
  if (static_cast<Eigen::Index>(blocks.size()) != k) {
    fail(errc::validation_failure,
         std::to_string(blocks.size()) + " precision blocks for " +
             std::to_string(k) + " neighbor images");
  }
  if (y.size() != neighbor_images.cols()) {
    fail(errc::dimension_mismatch, "embedding dimension mismatch");
  }
  double total = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::VectorXd r = y - neighbor_images.row(j).transpose();
    total += r.dot(blocks[static_cast<std::size_t>(j)] * r);
  }
  return std::max(0.0, total);
}

double mahalanobis_score(const Eigen::VectorXd& y,
                         const std::vector<Eigen::MatrixXd>& blocks,
                         const Eigen::MatrixXd& neighbor_images) {
  return std::sqrt(mahalanobis_score_squared(y, blocks, neighbor_images));
}

ExtensionResult extend(const TrainingModel& model, const Eigen::VectorXd& x,
                       const WeightScheme& scheme) {
  model.validate();
  const auto collect = [&](double radius) {
    return collect_brute(model.points, x, radius);
  };
  const auto point_cov = [&](int j) {
    const Neighborhood nb = collect_brute(
        model.points, model.points.row(j).transpose(), model.epsilon);
    return local_covariance(gather_rows(model.images, nb.indices),
                            model.epsilon);
  };
  return extend_core(model, x, scheme, collect, point_cov);
}

Extender::Extender(TrainingModel model)
    : model_(std::move(model)), index_(checked_points(model_)) {
  const Eigen::Index p = model_.size();
  point_covariances_.reserve(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto hits =
        index_.radius_query(model_.points.row(j).transpose(), model_.epsilon);
    Eigen::MatrixXd imgs(static_cast<Eigen::Index>(hits.size()),
                         model_.embed_dim());
    for (std::size_t i = 0; i < hits.size(); ++i) {
      imgs.row(static_cast<Eigen::Index>(i)) =
          model_.images.row(hits[i].second);
    }
    point_covariances_.push_back(local_covariance(imgs, model_.epsilon));
  }
}

ExtensionResult Extender::extend(const Eigen::VectorXd& x,
                                 const WeightScheme& scheme) const {
  const auto collect = [&](double radius) {
    return from_hits(index_.radius_query(x, radius), x, radius);
  };
  const auto point_cov = [&](int j) {
    return point_covariances_[static_cast<std::size_t>(j)];
  };
  return extend_core(model_, x, scheme, collect, point_cov);
}

}  // namespace mapex
