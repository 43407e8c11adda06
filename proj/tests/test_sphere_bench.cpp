#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "mapex/errors.hpp"
#include "mapex/sphere_bench.hpp"
#include "test_helpers.hpp"

using namespace mapex;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_SUITE("sphere_bench") {

TEST_CASE("the sphere map hits the poles and equator exactly") {
  CHECK((sphere_map(0.0, 0.0) - Eigen::Vector3d(0, 0, 1)).norm() <= 1e-15);
  CHECK((sphere_map(kPi, 0.7) - Eigen::Vector3d(0, 0, -1)).norm() <= 1e-15);
  CHECK((sphere_map(kPi / 2, 0.0) - Eigen::Vector3d(1, 0, 0)).norm() <= 1e-15);
  CHECK((sphere_map(kPi / 2, kPi / 2) - Eigen::Vector3d(0, 1, 0)).norm() <=
        1e-15);
  const Eigen::Vector3d v = sphere_map(kPi / 4, kPi / 3);
  const double s = std::sqrt(0.5);
  CHECK(v(0) == doctest::Approx(s * 0.5).epsilon(1e-15));
  CHECK(v(1) == doctest::Approx(s * std::sqrt(3.0) / 2).epsilon(1e-15));
  CHECK(v(2) == doctest::Approx(s).epsilon(1e-15));
}

TEST_CASE("angles outside the parameter square are refused") {
  CHECK(test_util::throws_code([] { sphere_map(-0.1, 0.5); },
                               errc::out_of_range));
  CHECK(test_util::throws_code([] { sphere_map(0.5, kPi + 0.1); },
                               errc::out_of_range));
  CHECK(test_util::throws_code(
      [] { sphere_map(std::nan(""), 0.5); }, errc::out_of_range));
}

TEST_CASE("dataset sizes follow the grid") {
  const SphereDataset d30 = make_sphere_dataset(30, 7, 1);
  CHECK(d30.params.rows() == 900);
  CHECK(d30.images.rows() == 900);
  CHECK(d30.queries.rows() == 7);
  const SphereDataset d50 = make_sphere_dataset(50, 1, 1);
  CHECK(d50.params.rows() == 2500);
}

TEST_CASE("the two-per-axis grid is exactly the corner set") {
  const SphereDataset d = make_sphere_dataset(2, 1, 1);
  REQUIRE(d.params.rows() == 4);
  std::vector<std::pair<double, double>> got;
  for (int i = 0; i < 4; ++i) got.emplace_back(d.params(i, 0), d.params(i, 1));
  std::sort(got.begin(), got.end());
  CHECK(got[0] == std::pair<double, double>(0.0, 0.0));
  CHECK(got[1] == std::pair<double, double>(0.0, kPi));
  CHECK(got[2] == std::pair<double, double>(kPi, 0.0));
  CHECK(got[3] == std::pair<double, double>(kPi, kPi));
}

TEST_CASE("every image lies on the unit sphere") {
  const SphereDataset d = make_sphere_dataset(13, 1, 1);
  for (Eigen::Index i = 0; i < d.images.rows(); ++i) {
    CHECK(std::abs(d.images.row(i).norm() - 1.0) <= 1e-12);
  }
  // images agree with mapping the parameters directly
  for (Eigen::Index i = 0; i < d.params.rows(); i += 17) {
    const Eigen::Vector3d v = sphere_map(d.params(i, 0), d.params(i, 1));
    CHECK((d.images.row(i).transpose() - v).norm() == 0.0);
  }
}

TEST_CASE("queries avoid the poles but cover theta fully") {
  const SphereDataset d = make_sphere_dataset(5, 500, 9);
  double phi_lo = kPi, phi_hi = 0.0;
  for (Eigen::Index q = 0; q < d.queries.rows(); ++q) {
    const double phi = d.queries(q, 0);
    const double theta = d.queries(q, 1);
    CHECK(phi >= 0.05 * kPi);
    CHECK(phi <= 0.95 * kPi);
    CHECK(theta >= 0.0);
    CHECK(theta <= kPi);
    phi_lo = std::min(phi_lo, phi);
    phi_hi = std::max(phi_hi, phi);
  }
  // 500 draws spread over most of the allowed band
  CHECK(phi_lo < 0.15 * kPi);
  CHECK(phi_hi > 0.85 * kPi);
}

TEST_CASE("datasets are reproducible from the seed") {
  const SphereDataset a = make_sphere_dataset(6, 40, 123);
  const SphereDataset b = make_sphere_dataset(6, 40, 123);
  CHECK(a.params == b.params);
  CHECK(a.images == b.images);
  CHECK(a.queries == b.queries);
  const SphereDataset c = make_sphere_dataset(6, 40, 124);
  CHECK(a.queries != c.queries);
}

TEST_CASE("degenerate dataset requests are refused") {
  CHECK(test_util::throws_code([] { make_sphere_dataset(1, 5, 1); },
                               errc::validation_failure));
  CHECK(test_util::throws_code([] { make_sphere_dataset(10, 0, 1); },
                               errc::validation_failure));
}

TEST_CASE("a small benchmark run produces a coherent report") {
  const BenchReport r = run_sphere_bench(30, 50, WeightKind::distance, 1);
  CHECK(r.scheme == "distance");
  CHECK(r.training_size == 900);
  CHECK(r.per_query_errors.size() == 50);
  CHECK(r.failed_queries == 0);
  CHECK(r.bound_violations == 0);
  CHECK(r.mean_error > 0.0);
  CHECK(r.mean_error <= r.max_error);
  CHECK(r.max_error <= 3.0 * r.lipschitz_k * r.delta);
  CHECK(r.epsilon == doctest::Approx(2.5 * kPi / 29.0).epsilon(1e-15));
  CHECK(r.curvature_c == 2.0);
  CHECK(r.delta > 0.0);
  CHECK(r.lipschitz_k > 0.0);
  CHECK(r.seed == 1);
  double worst = 0.0;
  for (double e : r.per_query_errors) {
    CHECK(std::isfinite(e));
    worst = std::max(worst, e);
  }
  CHECK(worst == r.max_error);
}

TEST_CASE("the all-scheme run shares geometry across schemes") {
  const auto reports = run_sphere_bench_all(10, 20, 7);
  REQUIRE(reports.size() == 3);
  CHECK(reports[0].scheme == "distance");
  CHECK(reports[1].scheme == "tangent");
  CHECK(reports[2].scheme == "tangent-per-point");
  for (const auto& r : reports) {
    CHECK(r.delta == reports[0].delta);
    CHECK(r.lipschitz_k == reports[0].lipschitz_k);
    CHECK(r.epsilon == reports[0].epsilon);
    CHECK(r.training_size == 100);
    CHECK(r.failed_queries == 0);
  }
  // the single-scheme entry point reproduces the matching slice
  const BenchReport solo = run_sphere_bench(10, 20, WeightKind::shared_tangent, 7);
  CHECK(solo.mean_error == reports[1].mean_error);
  CHECK(solo.max_error == reports[1].max_error);
}

TEST_CASE("anomaly labels list inliers before outliers") {
  const AnomalyScenario sc = make_anomaly_scenario(50, 5, 0.5, 2);
  REQUIRE(sc.labels.size() == 55);
  REQUIRE(sc.queries.rows() == 55);
  for (int i = 0; i < 50; ++i) CHECK(sc.labels[static_cast<std::size_t>(i)] == 0);
  for (int i = 50; i < 55; ++i) CHECK(sc.labels[static_cast<std::size_t>(i)] == 1);
  // inlier queries are training rows verbatim; outliers leave the sphere
  for (int i = 0; i < 55; ++i) {
    const double norm = sc.queries.row(i).norm();
    if (sc.labels[static_cast<std::size_t>(i)] == 0) {
      CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
    } else {
      CHECK(norm == doctest::Approx(1.5).epsilon(1e-12));
    }
  }
  CHECK(sc.scheme.kind == WeightKind::shared_tangent);
}

TEST_CASE("zero displacement zeroes every score") {
  const auto pts = run_anomaly_scenario(30, 6, 0.0, 5);
  REQUIRE(pts.size() == 36);
  for (const auto& p : pts) CHECK(p.score == 0.0);
}

TEST_CASE("displaced outliers score far above on-model inliers") {
  const auto pts = run_anomaly_scenario(50, 5, 0.5, 2);
  REQUIRE(pts.size() == 55);
  double max_inlier = 0.0;
  double min_outlier = std::numeric_limits<double>::infinity();
  std::vector<double> inlier_scores;
  for (const auto& p : pts) {
    CHECK(p.score >= 0.0);
    if (p.is_outlier) {
      min_outlier = std::min(min_outlier, p.score);
    } else {
      max_inlier = std::max(max_inlier, p.score);
      inlier_scores.push_back(p.score);
    }
  }
  REQUIRE(inlier_scores.size() == 50);
  std::sort(inlier_scores.begin(), inlier_scores.end());
  const double median = inlier_scores[inlier_scores.size() / 2];
  CHECK(min_outlier > max_inlier);
  CHECK(min_outlier > std::max(10.0 * median, 1e-9));
}

TEST_CASE("anomaly scenarios are deterministic in the seed") {
  const auto a = run_anomaly_scenario(20, 4, 0.3, 11);
  const auto b = run_anomaly_scenario(20, 4, 0.3, 11);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].score == b[i].score);
    CHECK(a[i].is_outlier == b[i].is_outlier);
  }
}

}  // TEST_SUITE
