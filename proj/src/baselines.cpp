#include "mapex/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "mapex/errors.hpp"

namespace mapex {

namespace {

void check_points(const Eigen::MatrixXd& points) {
  if (points.rows() < 1 || points.cols() < 1) {
    fail(errc::validation_failure, "point set must be nonempty");
  }
  if (!points.allFinite()) {
    fail(errc::validation_failure, "points must be finite");
  }
}

void check_scale(double epsilon, const char* label) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    fail(errc::validation_failure,
         std::string(label) + " must be positive and finite");
  }
}

// Least-squares coefficients and the fitted values at the training points;
// shared by the single-scale extension and the multiscale fit.
std::pair<Eigen::VectorXd, Eigen::VectorXd> pinv_fit(
    const Eigen::MatrixXd& basis, const Eigen::VectorXd& f) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(basis,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0 ||
      sv(sv.size() - 1) < 1e-12 * sv(0)) {
    fail(errc::ill_conditioned_basis,
         "basis spectrum spans more than 1e12; cannot invert stably");
  }
  Eigen::VectorXd coefficients = svd.solve(f);
  Eigen::VectorXd projection = basis * coefficients;
  return {std::move(coefficients), std::move(projection)};
}

// Numerical rank of the kernel estimated from a sampled column subset.
int estimate_rank(const Eigen::MatrixXd& kernel, std::mt19937_64& rng) {
  const Eigen::Index p = kernel.rows();
  const Eigen::Index q = std::min<Eigen::Index>(p, 256);
  std::vector<int> cols(static_cast<std::size_t>(p));
  std::iota(cols.begin(), cols.end(), 0);
  std::shuffle(cols.begin(), cols.end(), rng);
  Eigen::MatrixXd sample(p, q);
  for (Eigen::Index i = 0; i < q; ++i) {
    sample.col(i) = kernel.col(cols[static_cast<std::size_t>(i)]);
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(sample);
  const Eigen::VectorXd& sv = svd.singularValues();
  int count = 0;
  if (sv.size() > 0 && sv(0) > 0.0) {
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      if (sv(i) > 1e-3 * sv(0)) ++count;
    }
  }
  const int hi = static_cast<int>(p) - 1;
  return std::max(1, std::min(count, hi));
}

double kernel_value(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                    double epsilon) {
  return std::exp(-(a - b).squaredNorm() / epsilon);
}

}  // namespace

double rms_norm(const Eigen::VectorXd& v) {
  if (v.size() == 0) return 0.0;
  return std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
}

double max_squared_pairwise_distance(const Eigen::MatrixXd& points) {
  check_points(points);
  double best = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < points.rows(); ++j) {
      best = std::max(best, (points.row(i) - points.row(j)).squaredNorm());
    }
  }
  return best;
}

double median_squared_pairwise_distance(const Eigen::MatrixXd& points) {
  check_points(points);
  const Eigen::Index p = points.rows();
  if (p < 2) return 0.0;
  std::vector<double> d2;
  d2.reserve(static_cast<std::size_t>(p * (p - 1) / 2));
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i + 1; j < p; ++j) {
      d2.push_back((points.row(i) - points.row(j)).squaredNorm());
    }
  }
  const std::size_t mid = d2.size() / 2;
  std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(mid),
                   d2.end());
  return d2[mid];
}

double resolve_kernel_epsilon(const Eigen::MatrixXd& points, double epsilon) {
  if (epsilon > 0.0) {
    check_scale(epsilon, "kernel epsilon");
    return epsilon;
  }
  const double median = median_squared_pairwise_distance(points);
  return median > 0.0 ? median : 1.0;
}

Eigen::MatrixXd build_gaussian_kernel(const Eigen::MatrixXd& points,
                                      double epsilon) {
  check_points(points);
  check_scale(epsilon, "kernel epsilon");
  const Eigen::Index p = points.rows();
  Eigen::MatrixXd g(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    g(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < p; ++j) {
      const double v =
          std::exp(-(points.row(i) - points.row(j)).squaredNorm() / epsilon);
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

Eigen::VectorXd gaussian_kernel_row(const Eigen::MatrixXd& points,
                                    const Eigen::VectorXd& x, double epsilon) {
  check_points(points);
  check_scale(epsilon, "kernel epsilon");
  if (x.size() != points.cols()) {
    fail(errc::dimension_mismatch,
         "query has dimension " + std::to_string(x.size()) + " but points have " +
             std::to_string(points.cols()));
  }
  Eigen::VectorXd g(points.rows());
  for (Eigen::Index j = 0; j < points.rows(); ++j) {
    g(j) = std::exp(-(points.row(j).transpose() - x).squaredNorm() / epsilon);
  }
  return g;
}

EigenSystem kernel_eigensystem(const Eigen::MatrixXd& kernel) {
  if (kernel.rows() != kernel.cols() || kernel.rows() < 1) {
    fail(errc::validation_failure, "kernel must be square and nonempty");
  }
  const double scale = std::max(1.0, kernel.cwiseAbs().maxCoeff());
  if ((kernel - kernel.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    fail(errc::validation_failure, "kernel is not symmetric within tolerance");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(kernel);
  if (solver.info() != Eigen::Success) {
    fail(errc::no_convergence, "eigendecomposition did not converge");
  }
  EigenSystem sys;
  sys.eigenvalues = solver.eigenvalues().reverse();
  sys.eigenvectors = solver.eigenvectors().rowwise().reverse();
  return sys;
}

int significant_components(const EigenSystem& sys, double significance) {
  if (sys.eigenvalues.size() == 0) return 0;
  const double lead = sys.eigenvalues.cwiseAbs().maxCoeff();
  if (lead == 0.0) return 0;
  int count = 0;
  for (Eigen::Index i = 0; i < sys.eigenvalues.size(); ++i) {
    if (std::abs(sys.eigenvalues(i)) > significance * lead) ++count;
  }
  return count;
}

double nystrom_extend_eigenfunction(const Eigen::MatrixXd& points,
                                    double epsilon, const Eigen::VectorXd& phi,
                                    double lambda, const Eigen::VectorXd& x,
                                    double lambda_max) {
  if (phi.size() != points.rows()) {
    fail(errc::dimension_mismatch,
         "eigenvector length " + std::to_string(phi.size()) +
             " does not match " + std::to_string(points.rows()) + " points");
  }
  const double scale = std::max(std::abs(lambda_max), std::abs(lambda));
  if (scale == 0.0 || std::abs(lambda) <= 1e-12 * scale) {
    fail(errc::spectrum_cutoff,
         "eigenvalue " + std::to_string(lambda) +
             " lies below the relative spectrum cutoff 1e-12");
  }
  const Eigen::VectorXd g = gaussian_kernel_row(points, x, epsilon);
  return g.dot(phi) / lambda;
}

double nystrom_extend_function(const Eigen::MatrixXd& points, double epsilon,
                               const Eigen::VectorXd& f, int num_components,
                               const Eigen::VectorXd& x) {
  check_points(points);
  if (f.size() != points.rows()) {
    fail(errc::dimension_mismatch,
         "function has " + std::to_string(f.size()) + " values for " +
             std::to_string(points.rows()) + " points");
  }
  if (num_components < 1 || num_components > points.rows()) {
    fail(errc::validation_failure,
         "num_components must lie in [1, " + std::to_string(points.rows()) +
             "]");
  }
  const double eps = resolve_kernel_epsilon(points, epsilon);
  const EigenSystem sys = kernel_eigensystem(build_gaussian_kernel(points, eps));
  const double lead = sys.eigenvalues.cwiseAbs().maxCoeff();
  const Eigen::VectorXd g = gaussian_kernel_row(points, x, eps);
  double value = 0.0;
  for (int i = 0; i < num_components; ++i) {
    const double lambda = sys.eigenvalues(i);
    if (lead == 0.0 || std::abs(lambda) <= 1e-12 * lead) {
      fail(errc::spectrum_cutoff,
           "component " + std::to_string(i) +
               " lies below the relative spectrum cutoff 1e-12");
    }
    const Eigen::VectorXd phi = sys.eigenvectors.col(i);
    value += phi.dot(f) * g.dot(phi) / lambda;
  }
  return value;
}

InterpolativeDecomposition randomized_id(const Eigen::MatrixXd& a, int l,
                                         std::mt19937_64& rng) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  if (m < 1 || n < 1 || !a.allFinite()) {
    fail(errc::validation_failure, "matrix must be nonempty and finite");
  }
  const Eigen::Index minmn = std::min(m, n);
  if (l < 1 || l >= minmn) {
    fail(errc::validation_failure,
         "rank " + std::to_string(l) + " must satisfy 1 <= l < min(" +
             std::to_string(m) + ", " + std::to_string(n) + ")");
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  constexpr int kAttempts = 4;  // first try plus three retries
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    Eigen::MatrixXd sketch(l, m);
    for (Eigen::Index i = 0; i < l; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) sketch(i, j) = gauss(rng);
    }
    const Eigen::MatrixXd w = sketch * a;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(w);
    const Eigen::MatrixXd r = qr.matrixR().triangularView<Eigen::Upper>();
    const double lead = std::abs(r(0, 0));
    if (lead == 0.0 || std::abs(r(l - 1, l - 1)) <= 1e-12 * lead) {
      continue;  // sketch lost rank; redraw
    }
    const auto& perm = qr.colsPermutation();
    InterpolativeDecomposition id;
    id.columns.resize(static_cast<std::size_t>(l));
    for (int i = 0; i < l; ++i) {
      id.columns[static_cast<std::size_t>(i)] = perm.indices()(i);
    }
    id.basis.resize(m, l);
    for (int i = 0; i < l; ++i) {
      id.basis.col(i) = a.col(id.columns[static_cast<std::size_t>(i)]);
    }
    Eigen::MatrixXd permuted(l, n);
    permuted.leftCols(l) = Eigen::MatrixXd::Identity(l, l);
    permuted.rightCols(n - l) = r.topLeftCorner(l, l)
                                    .triangularView<Eigen::Upper>()
                                    .solve(r.topRightCorner(l, n - l));
    id.interp = permuted * perm.inverse();
    return id;
  }
  fail(errc::rank_deficient_sketch,
       "sketch rank stayed below " + std::to_string(l) + " after " +
           std::to_string(kAttempts) + " attempts");
}

SingleScaleResult single_scale_extend(const Eigen::MatrixXd& basis,
                                      const std::vector<int>& sampled_indices,
                                      const Eigen::MatrixXd& points,
                                      const Eigen::VectorXd& f,
                                      const Eigen::VectorXd& x,
                                      double epsilon_s) {
  check_points(points);
  check_scale(epsilon_s, "epsilon_s");
  if (basis.rows() != f.size() || basis.rows() != points.rows()) {
    fail(errc::dimension_mismatch,
         "basis rows, point rows, and function length must agree");
  }
  if (basis.cols() != static_cast<Eigen::Index>(sampled_indices.size())) {
    fail(errc::dimension_mismatch,
         std::to_string(sampled_indices.size()) + " sampled indices for " +
             std::to_string(basis.cols()) + " basis columns");
  }
  if (x.size() != points.cols()) {
    fail(errc::dimension_mismatch, "query dimension mismatch");
  }
  for (int idx : sampled_indices) {
    if (idx < 0 || idx >= points.rows()) {
      fail(errc::validation_failure,
           "sampled index " + std::to_string(idx) + " out of range");
    }
  }
  auto [coefficients, projection] = pinv_fit(basis, f);
  SingleScaleResult res;
  res.value_at_x = 0.0;
  for (std::size_t i = 0; i < sampled_indices.size(); ++i) {
    res.value_at_x +=
        coefficients(static_cast<Eigen::Index>(i)) *
        kernel_value(points.row(sampled_indices[i]).transpose(), x, epsilon_s);
  }
  res.coefficients = std::move(coefficients);
  res.projection = std::move(projection);
  return res;
}

MseFit mse_fit(const Eigen::MatrixXd& points, const Eigen::VectorXd& f,
               double t, double err, std::uint64_t seed, int max_scales) {
  check_points(points);
  if (points.rows() < 2) {
    fail(errc::validation_failure,
         "multiscale fit needs at least two points");
  }
  if (f.size() != points.rows()) {
    fail(errc::dimension_mismatch,
         "function has " + std::to_string(f.size()) + " values for " +
             std::to_string(points.rows()) + " points");
  }
  if (!f.allFinite()) {
    fail(errc::validation_failure, "function values must be finite");
  }
  if (!(err >= 0.0) || !std::isfinite(err)) {
    fail(errc::validation_failure, "err must be nonnegative and finite");
  }
  if (max_scales < 1) {
    fail(errc::validation_failure, "max_scales must be at least 1");
  }
  double top = t;
  if (top <= 0.0) {
    top = max_squared_pairwise_distance(points);
    if (top <= 0.0) top = 1.0;
  }
  check_scale(top, "t");

  std::mt19937_64 rng(seed);
  MseFit fit;
  fit.t = top;
  fit.seed = seed;
  Eigen::VectorXd residual = f;
  bool converged = false;
  for (int s = 0; s < max_scales; ++s) {
    if (rms_norm(residual) <= err) {
      converged = true;
      break;
    }
    const double epsilon_s = std::ldexp(top, -s);
    const Eigen::MatrixXd kernel = build_gaussian_kernel(points, epsilon_s);
    const int rank = estimate_rank(kernel, rng);
    InterpolativeDecomposition id = randomized_id(kernel, rank, rng);
    auto [coefficients, projection] = pinv_fit(id.basis, residual);

    MseScale scale;
    scale.scale = s;
    scale.epsilon_s = epsilon_s;
    scale.rank = rank;
    scale.sampled_indices = id.columns;
    scale.basis = std::move(id.basis);
    scale.sample_points.resize(rank, points.cols());
    for (int i = 0; i < rank; ++i) {
      scale.sample_points.row(i) =
          points.row(scale.sampled_indices[static_cast<std::size_t>(i)]);
    }
    scale.coefficients = coefficients;
    fit.scales.push_back(std::move(scale));

    residual -= projection;
  }
  if (!converged && rms_norm(residual) > err) {
    fail(errc::no_convergence,
         "rms residual " + std::to_string(rms_norm(residual)) + " after " +
             std::to_string(max_scales) + " scales exceeds target " +
             std::to_string(err));
  }
  fit.residual = residual;
  fit.training_residual = rms_norm(residual);
  fit.approximation = f - residual;
  return fit;
}

double mse_extend_value(const MseFit& fit, const Eigen::VectorXd& x) {
  double value = 0.0;
  for (const MseScale& scale : fit.scales) {
    if (x.size() != scale.sample_points.cols()) {
      fail(errc::dimension_mismatch, "query dimension mismatch");
    }
    for (Eigen::Index i = 0; i < scale.coefficients.size(); ++i) {
      value += scale.coefficients(i) *
               kernel_value(scale.sample_points.row(i).transpose(), x,
                            scale.epsilon_s);
    }
  }
  return value;
}

MseResult mse_extend(const Eigen::MatrixXd& points, const Eigen::VectorXd& f,
                     const Eigen::VectorXd& x, double t, double err,
                     std::uint64_t seed, int max_scales) {
  const MseFit fit = mse_fit(points, f, t, err, seed, max_scales);
  MseResult res;
  res.approximation = fit.approximation;
  res.value_at_x = mse_extend_value(fit, x);
  res.training_residual = fit.training_residual;
  res.scales_used = static_cast<int>(fit.scales.size());
  return res;
}

std::vector<PyramidLevel> laplacian_pyramid_fit(const Eigen::MatrixXd& points,
                                                const Eigen::VectorXd& f,
                                                double sigma0, double err,
                                                int max_levels) {
  check_points(points);
  if (f.size() != points.rows()) {
    fail(errc::dimension_mismatch,
         "function has " + std::to_string(f.size()) + " values for " +
             std::to_string(points.rows()) + " points");
  }
  if (!f.allFinite()) {
    fail(errc::validation_failure, "function values must be finite");
  }
  if (!(err >= 0.0) || !std::isfinite(err)) {
    fail(errc::validation_failure, "err must be nonnegative and finite");
  }
  if (max_levels < 1) {
    fail(errc::validation_failure, "max_levels must be at least 1");
  }
  double top = sigma0;
  if (top <= 0.0) {
    top = max_squared_pairwise_distance(points);
    if (top <= 0.0) top = 1.0;
  }
  check_scale(top, "sigma0");

  std::vector<PyramidLevel> levels;
  Eigen::VectorXd residual = f;
  for (int level = 0; level < max_levels; ++level) {
    const double before = rms_norm(residual);
    if (before <= err) return levels;
    const double sigma = std::ldexp(top, -level);
    const Eigen::MatrixXd kernel = build_gaussian_kernel(points, sigma);
    // row sums are at least 1 because the diagonal is exp(0)
    const Eigen::VectorXd smoothed =
        (kernel * residual).cwiseQuotient(kernel.rowwise().sum());
    levels.push_back(PyramidLevel{level, sigma, residual, smoothed});
    Eigen::VectorXd next = residual - smoothed;
    const double after = rms_norm(next);
    if (after > before * (1.0 + 1e-9)) {
      fail(errc::no_convergence,
           "rms residual grew from " + std::to_string(before) + " to " +
               std::to_string(after) + " at level " + std::to_string(level));
    }
    residual = std::move(next);
  }
  if (rms_norm(residual) <= err) return levels;
  fail(errc::no_convergence,
       "rms residual " + std::to_string(rms_norm(residual)) + " after " +
           std::to_string(max_levels) + " levels exceeds target " +
           std::to_string(err));
}

double pyramid_training_residual(const std::vector<PyramidLevel>& levels) {
  if (levels.empty()) return 0.0;
  const PyramidLevel& last = levels.back();
  return rms_norm(last.residual - last.approximation);
}

double laplacian_pyramid_extend(const std::vector<PyramidLevel>& levels,
                                const Eigen::MatrixXd& points,
                                const Eigen::VectorXd& y) {
  double value = 0.0;
  for (const PyramidLevel& level : levels) {
    const Eigen::VectorXd weights = gaussian_kernel_row(points, y, level.sigma);
    const double denom = weights.sum();
    if (denom > 0.0) value += weights.dot(level.residual) / denom;
  }
  return value;
}

}  // namespace mapex
