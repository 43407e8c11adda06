#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

namespace mapex {

double rms_norm(const Eigen::VectorXd& v);

// Exact quadratic-cost helpers; intended for benchmark-sized point sets.
double max_squared_pairwise_distance(const Eigen::MatrixXd& points);
double median_squared_pairwise_distance(const Eigen::MatrixXd& points);

// epsilon <= 0 selects the median squared pairwise distance, falling back to
// 1.0 when that median is zero.
double resolve_kernel_epsilon(const Eigen::MatrixXd& points, double epsilon);

// Gaussian similarity kernel g(x, y) = exp(-|x - y|^2 / epsilon).
Eigen::MatrixXd build_gaussian_kernel(const Eigen::MatrixXd& points,
                                      double epsilon);
Eigen::VectorXd gaussian_kernel_row(const Eigen::MatrixXd& points,
                                    const Eigen::VectorXd& x, double epsilon);

// Symmetric eigendecomposition sorted by descending eigenvalue; column i of
// eigenvectors pairs with eigenvalues[i].
struct EigenSystem {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
};
EigenSystem kernel_eigensystem(const Eigen::MatrixXd& kernel);

// Number of leading eigenpairs with |eigenvalue| > significance * max
// |eigenvalue|. Extensions of eigenvectors below this level no longer
// reproduce their own training values at double precision, so callers should
// not extend them.
int significant_components(const EigenSystem& sys, double significance = 1e-6);

// Kernel eigenvector extension (1/lambda) sum_j g(x, x_j) phi_j. lambda_max
// sets the scale of the relative spectrum cutoff (1e-12); pass 0 to measure
// lambda against itself, which then only rejects an exactly zero eigenvalue.
double nystrom_extend_eigenfunction(const Eigen::MatrixXd& points,
                                    double epsilon, const Eigen::VectorXd& phi,
                                    double lambda, const Eigen::VectorXd& x,
                                    double lambda_max = 0.0);

// Expands f on the top num_components kernel eigenvectors of the training set
// and evaluates the extended expansion at x.
double nystrom_extend_function(const Eigen::MatrixXd& points, double epsilon,
                               const Eigen::VectorXd& f, int num_components,
                               const Eigen::VectorXd& x);

// Interpolative decomposition a ~ basis * interp where basis = a(:, columns)
// and interp carries an identity on the selected columns.
struct InterpolativeDecomposition {
  Eigen::MatrixXd basis;     // m x l
  std::vector<int> columns;  // l column indices into a
  Eigen::MatrixXd interp;    // l x n
};

// Randomized column selection: sketch a with an l x m Gaussian matrix, pivot
// its QR, keep the first l pivot columns. Retries the sketch up to three
// times when it comes back rank deficient, then throws RankDeficientSketch.
// Requires 1 <= l < min(m, n).
InterpolativeDecomposition randomized_id(const Eigen::MatrixXd& a, int l,
                                         std::mt19937_64& rng);

// Least-squares fit of f on the sampled kernel columns, evaluated at x using
// the same Gaussian kernel at scale epsilon_s. Throws IllConditionedBasis when
// the basis spectrum spans more than 1e12.
struct SingleScaleResult {
  Eigen::VectorXd coefficients;  // one per sampled column
  Eigen::VectorXd projection;    // basis * coefficients at the training points
  double value_at_x = 0.0;
};
SingleScaleResult single_scale_extend(const Eigen::MatrixXd& basis,
                                      const std::vector<int>& sampled_indices,
                                      const Eigen::MatrixXd& points,
                                      const Eigen::VectorXd& f,
                                      const Eigen::VectorXd& x,
                                      double epsilon_s);

// One scale of the multiscale fit: the kernel at epsilon_s restricted to the
// sampled columns, with the coefficients fitted against that scale's residual.
struct MseScale {
  int scale = 0;
  double epsilon_s = 0.0;
  int rank = 0;
  std::vector<int> sampled_indices;
  Eigen::MatrixXd basis;          // p x rank
  Eigen::MatrixXd sample_points;  // rank x n
  Eigen::VectorXd coefficients;
};

struct MseFit {
  std::vector<MseScale> scales;
  double t = 0.0;                  // top kernel scale; epsilon_s = t / 2^s
  double training_residual = 0.0;  // rms of `residual`
  Eigen::VectorXd residual;        // f minus the accumulated approximation
  Eigen::VectorXd approximation;   // at the training points
  std::uint64_t seed = 0;
};

// Multiscale least-squares fit: halves the kernel scale until the rms training
// residual drops to err, estimating each scale's numerical rank from a sampled
// column subset. t <= 0 selects the max squared pairwise distance. Throws
// NoConvergence when max_scales scales do not reach err.
MseFit mse_fit(const Eigen::MatrixXd& points, const Eigen::VectorXd& f,
               double t, double err, std::uint64_t seed, int max_scales = 20);
double mse_extend_value(const MseFit& fit, const Eigen::VectorXd& x);

struct MseResult {
  Eigen::VectorXd approximation;
  double value_at_x = 0.0;
  double training_residual = 0.0;
  int scales_used = 0;
};
MseResult mse_extend(const Eigen::MatrixXd& points, const Eigen::VectorXd& f,
                     const Eigen::VectorXd& x, double t, double err,
                     std::uint64_t seed, int max_scales = 20);

// One smoothing level: the residual d_l it consumed and the kernel-smoothed
// approximation s_l it produced; sigma halves level to level.
struct PyramidLevel {
  int level = 0;
  double sigma = 0.0;
  Eigen::VectorXd residual;
  Eigen::VectorXd approximation;
};

// Iterated Gaussian smoothing of residuals with row-normalized kernels.
// sigma0 <= 0 selects the max squared pairwise distance. Stops once the rms
// residual drops to err; throws NoConvergence when max_levels levels are
// exhausted or a level fails to shrink the residual.
std::vector<PyramidLevel> laplacian_pyramid_fit(const Eigen::MatrixXd& points,
                                                const Eigen::VectorXd& f,
                                                double sigma0, double err,
                                                int max_levels = 15);

// rms of the residual left after the last level; 0 for an empty pyramid.
double pyramid_training_residual(const std::vector<PyramidLevel>& levels);

// Sum of the per-level smoothed estimates at y. A level whose kernel weights
// all underflow at y contributes nothing.
double laplacian_pyramid_extend(const std::vector<PyramidLevel>& levels,
                                const Eigen::MatrixXd& points,
                                const Eigen::VectorXd& y);

}  // namespace mapex
