#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Dense>

#include "mapex/baselines.hpp"
#include "mapex/extend.hpp"
#include "mapex/io.hpp"
#include "mapex/sphere_bench.hpp"
#include "mapex/spatial_index.hpp"
#include "mapex/types.hpp"

namespace {

using mapex::errc;
using mapex::MapexError;

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    mapex::fail(errc::io_failure, "cannot open " + path + " for writing");
  }
  out << content;
  out.flush();
  if (!out) {
    mapex::fail(errc::io_failure, "failed writing " + path);
  }
}

// error text goes into a CSV column; keep it one field wide
std::string csv_safe(std::string text) {
  for (char& c : text) {
    if (c == ',') c = ';';
    if (c == '\n' || c == '\r') c = ' ';
  }
  return text;
}

std::string results_header(Eigen::Index embed_dim, const std::string& extra) {
  std::string header = "query_id";
  for (Eigen::Index j = 0; j < embed_dim; ++j) {
    header += ",y_" + std::to_string(j + 1);
  }
  header += ",score,neighbor_count,epsilon_used";
  if (!extra.empty()) header += "," + extra;
  header += '\n';
  return header;
}

std::string result_row(Eigen::Index query_id,
                       const mapex::ExtensionResult& res) {
  std::string row = std::to_string(query_id);
  for (Eigen::Index j = 0; j < res.embedding.size(); ++j) {
    row += ',' + mapex::format_double(res.embedding(j));
  }
  row += ',' + mapex::format_double(res.score);
  row += ',' + std::to_string(res.neighbor_count);
  row += ',' + mapex::format_double(res.epsilon_used);
  return row;
}

std::string failure_row(Eigen::Index query_id, Eigen::Index embed_dim) {
  std::string row = std::to_string(query_id);
  for (Eigen::Index j = 0; j < embed_dim + 3; ++j) row += ',';
  return row;
}

struct ModelOverrides {
  std::optional<double> epsilon;
  std::optional<double> curvature_c;
};

mapex::TrainingModel load_model_with_overrides(const std::string& path,
                                               const ModelOverrides& over) {
  mapex::TrainingModel model = mapex::load_model(path);
  if (over.epsilon) {
    if (!(*over.epsilon > 0.0) || !std::isfinite(*over.epsilon)) {
      mapex::fail(errc::validation_failure,
                  "--epsilon must be positive and finite");
    }
    model.epsilon = *over.epsilon;
  }
  if (over.curvature_c) {
    if (!(*over.curvature_c > 0.0) || !std::isfinite(*over.curvature_c)) {
      mapex::fail(errc::validation_failure,
                  "--curvature-c must be positive and finite");
    }
    model.curvature_c = *over.curvature_c;
  }
  return model;
}

int run_fit(const std::string& points_path, const std::string& images_path,
            double epsilon, double curvature_c, const std::string& out_path) {
  mapex::TrainingModel model;
  model.points = mapex::read_points_table(points_path, 0);
  model.images = mapex::read_points_table(images_path, 0);
  model.epsilon = epsilon;
  model.curvature_c = curvature_c;
  model.validate();
  mapex::save_model(model, out_path);

  // largest nearest-other-neighbor distance: how well the training set covers
  // itself
  double cover = 0.0;
  for (Eigen::Index i = 0; i < model.size(); ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < model.size(); ++j) {
      if (i == j) continue;
      nearest = std::min(
          nearest, (model.points.row(i) - model.points.row(j)).norm());
    }
    if (std::isfinite(nearest)) cover = std::max(cover, nearest);
  }
  std::printf("p=%lld n=%lld d=%lld covering_radius=%s\n",
              static_cast<long long>(model.size()),
              static_cast<long long>(model.ambient_dim()),
              static_cast<long long>(model.embed_dim()),
              mapex::format_double(cover).c_str());
  std::printf("model written to %s\n", out_path.c_str());
  return 0;
}

int run_extend(const std::string& model_path, const std::string& queries_path,
               const std::string& scheme_name, const ModelOverrides& over,
               const std::string& out_path) {
  const mapex::TrainingModel model =
      load_model_with_overrides(model_path, over);
  const Eigen::MatrixXd queries =
      mapex::read_points_table(queries_path, model.ambient_dim());
  const mapex::WeightScheme scheme{mapex::parse_weight_kind(scheme_name),
                                   model.curvature_c};
  const mapex::Extender extender(model);
  const Eigen::Index d = model.embed_dim();

  std::string out = results_header(d, "error");
  int ok = 0;
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    try {
      const mapex::ExtensionResult res =
          extender.extend(queries.row(q).transpose(), scheme);
      out += result_row(q, res) + ",\n";
      ++ok;
    } catch (const MapexError& e) {
      out += failure_row(q, d) + ',' + csv_safe(e.what()) + '\n';
    }
  }
  write_file(out_path, out);
  const int failed = static_cast<int>(queries.rows()) - ok;
  std::printf("extended %d of %lld queries (%d failed)\n", ok,
              static_cast<long long>(queries.rows()), failed);
  if (queries.rows() > 0 && ok == 0) return 3;
  return 0;
}

int run_score(const std::string& model_path, const std::string& queries_path,
              const std::string& scheme_name, double threshold,
              const ModelOverrides& over, const std::string& out_path) {
  if (!(threshold > 0.0) || !std::isfinite(threshold)) {
    mapex::fail(errc::validation_failure,
                "--threshold must be positive and finite");
  }
  const mapex::TrainingModel model =
      load_model_with_overrides(model_path, over);
  const Eigen::MatrixXd queries =
      mapex::read_points_table(queries_path, model.ambient_dim());
  const mapex::WeightScheme scheme{mapex::parse_weight_kind(scheme_name),
                                   model.curvature_c};
  const mapex::Extender extender(model);
  const Eigen::Index d = model.embed_dim();

  std::string out = results_header(d, "anomalous");
  int ok = 0;
  int flagged = 0;
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    try {
      const mapex::ExtensionResult res =
          extender.extend(queries.row(q).transpose(), scheme);
      const bool anomalous = res.score > threshold;
      if (anomalous) ++flagged;
      out += result_row(q, res) + (anomalous ? ",1\n" : ",0\n");
      ++ok;
    } catch (const MapexError& e) {
      std::cerr << "query " << q << " failed: " << e.what() << "\n";
      out += failure_row(q, d) + ",\n";
    }
  }
  write_file(out_path, out);
  std::printf("flagged %d of %lld queries above threshold %s\n", flagged,
              static_cast<long long>(queries.rows()),
              mapex::format_double(threshold).c_str());
  if (queries.rows() > 0 && ok == 0) return 3;
  return 0;
}

int run_bench(int grid, int num_queries, std::uint64_t seed,
              double curvature_c, double eps_mult, const std::string& out_path,
              const std::string& emit_dir) {
  const std::vector<mapex::BenchReport> reports =
      mapex::run_sphere_bench_all(grid, num_queries, seed, curvature_c,
                                  eps_mult);

  std::string out =
      "scheme,training_size,mean_error,max_error,delta,lipschitz_k,"
      "bound_violations,failed_queries,epsilon,curvature_c,seed\n";
  for (const mapex::BenchReport& r : reports) {
    out += r.scheme;
    out += ',' + std::to_string(r.training_size);
    out += ',' + mapex::format_double(r.mean_error);
    out += ',' + mapex::format_double(r.max_error);
    out += ',' + mapex::format_double(r.delta);
    out += ',' + mapex::format_double(r.lipschitz_k);
    out += ',' + std::to_string(r.bound_violations);
    out += ',' + std::to_string(r.failed_queries);
    out += ',' + mapex::format_double(r.epsilon);
    out += ',' + mapex::format_double(r.curvature_c);
    out += ',' + std::to_string(r.seed);
    out += '\n';
  }
  write_file(out_path, out);

  // per-query errors, with the query parameters regenerated from the seed
  const mapex::SphereDataset ds =
      mapex::make_sphere_dataset(grid, num_queries, seed);
  std::string per_query = "scheme,query_id,phi,theta,error\n";
  for (const mapex::BenchReport& r : reports) {
    for (std::size_t q = 0; q < r.per_query_errors.size(); ++q) {
      per_query += r.scheme;
      per_query += ',' + std::to_string(q);
      per_query +=
          ',' + mapex::format_double(ds.queries(static_cast<Eigen::Index>(q), 0));
      per_query +=
          ',' + mapex::format_double(ds.queries(static_cast<Eigen::Index>(q), 1));
      const double err = r.per_query_errors[q];
      per_query += ',';
      if (std::isfinite(err)) per_query += mapex::format_double(err);
      per_query += '\n';
    }
  }
  write_file(out_path + ".queries.csv", per_query);

  if (!emit_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(emit_dir, ec);
    if (ec) {
      mapex::fail(errc::io_failure,
                  "cannot create " + emit_dir + ": " + ec.message());
    }
    const auto path = [&](const char* name) {
      return (std::filesystem::path(emit_dir) / name).string();
    };
    mapex::write_points_table(ds.params, path("points.csv"), {"phi", "theta"});
    mapex::write_points_table(ds.images, path("images.csv"),
                              {"y_1", "y_2", "y_3"});
    mapex::write_points_table(ds.queries, path("queries.csv"),
                              {"phi", "theta"});
  }

  for (const mapex::BenchReport& r : reports) {
    std::printf(
        "scheme=%s mean_error=%s max_error=%s delta=%s lipschitz_k=%s "
        "bound_violations=%d failed_queries=%d\n",
        r.scheme.c_str(), mapex::format_double(r.mean_error).c_str(),
        mapex::format_double(r.max_error).c_str(),
        mapex::format_double(r.delta).c_str(),
        mapex::format_double(r.lipschitz_k).c_str(), r.bound_violations,
        r.failed_queries);
  }
  std::printf("summary written to %s\n", out_path.c_str());
  return 0;
}

struct MethodValues {
  std::string method;
  std::vector<double> values;  // NaN where a query failed
  bool fitted = false;
  std::string error;
};

std::vector<MethodValues> compare_methods(const mapex::TrainingModel& model,
                                          const Eigen::VectorXd& f,
                                          const Eigen::MatrixXd& queries,
                                          const std::vector<int>& subset,
                                          double err, std::uint64_t seed) {
  const Eigen::Index s = static_cast<Eigen::Index>(subset.size());
  Eigen::MatrixXd pts(s, model.ambient_dim());
  Eigen::VectorXd fs(s);
  for (Eigen::Index i = 0; i < s; ++i) {
    pts.row(i) = model.points.row(subset[static_cast<std::size_t>(i)]);
    fs(i) = f(subset[static_cast<std::size_t>(i)]);
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<MethodValues> out;

  {
    MethodValues mv;
    mv.method = "pbe-tangent";
    mv.values.assign(static_cast<std::size_t>(queries.rows()), nan);
    try {
      mapex::TrainingModel sub;
      sub.points = pts;
      sub.images = fs;
      sub.epsilon = model.epsilon;
      sub.curvature_c = model.curvature_c;
      const mapex::Extender extender(sub);
      const mapex::WeightScheme scheme{mapex::WeightKind::shared_tangent,
                                       model.curvature_c};
      mv.fitted = true;
      for (Eigen::Index q = 0; q < queries.rows(); ++q) {
        try {
          mv.values[static_cast<std::size_t>(q)] =
              extender.extend(queries.row(q).transpose(), scheme).embedding(0);
        } catch (const MapexError&) {
        }
      }
    } catch (const MapexError& e) {
      mv.error = e.what();
    }
    out.push_back(std::move(mv));
  }

  {
    MethodValues mv;
    mv.method = "nystrom";
    mv.values.assign(static_cast<std::size_t>(queries.rows()), nan);
    try {
      const double kernel_eps = mapex::resolve_kernel_epsilon(pts, 0.0);
      const mapex::EigenSystem sys =
          mapex::kernel_eigensystem(mapex::build_gaussian_kernel(pts, kernel_eps));
      const int nc = mapex::significant_components(sys);
      if (nc < 1) {
        mapex::fail(errc::spectrum_cutoff, "no significant components");
      }
      const Eigen::MatrixXd basis = sys.eigenvectors.leftCols(nc);
      const Eigen::VectorXd coefs = basis.transpose() * fs;
      mv.fitted = true;
      for (Eigen::Index q = 0; q < queries.rows(); ++q) {
        const Eigen::VectorXd g = mapex::gaussian_kernel_row(
            pts, queries.row(q).transpose(), kernel_eps);
        const Eigen::VectorXd gv = basis.transpose() * g;
        double value = 0.0;
        for (int i = 0; i < nc; ++i) {
          value += coefs(i) * gv(i) / sys.eigenvalues(i);
        }
        mv.values[static_cast<std::size_t>(q)] = value;
      }
    } catch (const MapexError& e) {
      mv.error = e.what();
    }
    out.push_back(std::move(mv));
  }

  {
    MethodValues mv;
    mv.method = "mse";
    mv.values.assign(static_cast<std::size_t>(queries.rows()), nan);
    try {
      const mapex::MseFit fit = mapex::mse_fit(pts, fs, 0.0, err, seed);
      mv.fitted = true;
      for (Eigen::Index q = 0; q < queries.rows(); ++q) {
        mv.values[static_cast<std::size_t>(q)] =
            mapex::mse_extend_value(fit, queries.row(q).transpose());
      }
    } catch (const MapexError& e) {
      mv.error = e.what();
    }
    out.push_back(std::move(mv));
  }

  {
    MethodValues mv;
    mv.method = "laplacian-pyramid";
    mv.values.assign(static_cast<std::size_t>(queries.rows()), nan);
    try {
      const std::vector<mapex::PyramidLevel> levels =
          mapex::laplacian_pyramid_fit(pts, fs, 0.0, err);
      mv.fitted = true;
      for (Eigen::Index q = 0; q < queries.rows(); ++q) {
        mv.values[static_cast<std::size_t>(q)] =
            mapex::laplacian_pyramid_extend(levels, pts,
                                            queries.row(q).transpose());
      }
    } catch (const MapexError& e) {
      mv.error = e.what();
    }
    out.push_back(std::move(mv));
  }

  return out;
}

int run_compare(const std::string& model_path, const std::string& function_path,
                const std::string& queries_path, const std::string& truth_path,
                double err, std::uint64_t seed, const std::string& out_path) {
  if (!(err > 0.0) || !std::isfinite(err)) {
    mapex::fail(errc::validation_failure, "--err must be positive and finite");
  }
  const mapex::TrainingModel model = mapex::load_model(model_path);
  const Eigen::MatrixXd ftable = mapex::read_points_table(function_path, 1);
  if (ftable.rows() != model.size()) {
    mapex::fail(errc::validation_failure,
                "function has " + std::to_string(ftable.rows()) +
                    " values but the model has " +
                    std::to_string(model.size()) + " points");
  }
  const Eigen::VectorXd f = ftable.col(0);
  const Eigen::MatrixXd queries =
      mapex::read_points_table(queries_path, model.ambient_dim());
  if (queries.rows() < 1) {
    mapex::fail(errc::validation_failure, "need at least one query");
  }
  Eigen::VectorXd truth;
  const bool have_truth = !truth_path.empty();
  if (have_truth) {
    const Eigen::MatrixXd ttable = mapex::read_points_table(truth_path, 1);
    if (ttable.rows() != queries.rows()) {
      mapex::fail(errc::validation_failure,
                  "truth has " + std::to_string(ttable.rows()) +
                      " values but there are " +
                      std::to_string(queries.rows()) + " queries");
    }
    truth = ttable.col(0);
  }

  const int p = static_cast<int>(model.size());
  std::vector<int> sizes{std::min(100, p), std::min(400, p), p};
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());

  std::vector<int> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::string out;
  bool any_fitted = false;
  if (have_truth) {
    out = "method,training_size,mean_error,max_error,seed\n";
  } else {
    out = "query_id,method,value,seed\n";
  }

  for (const int size : sizes) {
    std::vector<int> subset(order.begin(), order.begin() + size);
    std::sort(subset.begin(), subset.end());
    const std::vector<MethodValues> methods =
        compare_methods(model, f, queries, subset, err, seed);
    for (const MethodValues& mv : methods) {
      if (!mv.fitted) {
        std::cerr << "method " << mv.method << " at training size " << size
                  << " failed: " << mv.error << "\n";
      } else {
        any_fitted = true;
      }
      if (have_truth) {
        double total = 0.0;
        double worst = 0.0;
        int ok = 0;
        for (std::size_t q = 0; q < mv.values.size(); ++q) {
          const double v = mv.values[q];
          if (!std::isfinite(v)) continue;
          const double e = std::abs(v - truth(static_cast<Eigen::Index>(q)));
          total += e;
          worst = std::max(worst, e);
          ++ok;
        }
        out += mv.method + ',' + std::to_string(size) + ',';
        if (ok > 0) {
          out += mapex::format_double(total / static_cast<double>(ok)) + ',' +
                 mapex::format_double(worst);
        } else {
          out += ',';
        }
        out += ',' + std::to_string(seed) + '\n';
        if (ok > 0) {
          std::printf("method=%s training_size=%d mean_error=%s max_error=%s\n",
                      mv.method.c_str(), size,
                      mapex::format_double(total / static_cast<double>(ok)).c_str(),
                      mapex::format_double(worst).c_str());
        } else {
          std::printf("method=%s training_size=%d failed\n", mv.method.c_str(),
                      size);
        }
      } else if (size == p) {
        for (std::size_t q = 0; q < mv.values.size(); ++q) {
          out += std::to_string(q) + ',' + mv.method + ',';
          if (std::isfinite(mv.values[q])) {
            out += mapex::format_double(mv.values[q]);
          }
          out += ',' + std::to_string(seed) + '\n';
        }
      }
    }
  }
  write_file(out_path, out);
  std::printf("comparison written to %s\n", out_path.c_str());
  return any_fitted ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Out-of-sample extension toolkit for embedding maps"};
  app.require_subcommand(1);

  const std::vector<std::string> scheme_names{"distance", "tangent",
                                              "tangent-per-point"};

  auto* fit = app.add_subcommand(
      "fit", "Assemble a model from points and images tables");
  std::string fit_points, fit_images, fit_out;
  double fit_epsilon = 0.0;
  double fit_c = 1.0;
  fit->add_option("--points", fit_points, "Training points CSV")->required();
  fit->add_option("--images", fit_images, "Training images CSV")->required();
  fit->add_option("--epsilon", fit_epsilon, "Neighborhood radius")->required();
  fit->add_option("--curvature-c", fit_c,
                  "Curvature constant stored with the model (default 1)");
  fit->add_option("--out", fit_out, "Model JSON path")->required();

  auto* ext = app.add_subcommand("extend", "Extend the map to query points");
  std::string ext_model, ext_queries, ext_out;
  std::string ext_scheme = "tangent";
  double ext_epsilon = 0.0;
  double ext_c = 0.0;
  ext->add_option("--model", ext_model, "Model JSON path")->required();
  ext->add_option("--queries", ext_queries, "Query points CSV")->required();
  ext->add_option("--out", ext_out, "Results CSV path")->required();
  ext->add_option("--scheme", ext_scheme, "Weight scheme (default tangent)")
      ->check(CLI::IsMember(scheme_names));
  auto* ext_eps_opt =
      ext->add_option("--epsilon", ext_epsilon, "Override model epsilon");
  auto* ext_c_opt = ext->add_option("--curvature-c", ext_c,
                                    "Override model curvature constant");

  auto* score = app.add_subcommand(
      "score", "Extend queries and flag abnormality scores above a threshold");
  std::string score_model, score_queries, score_out;
  std::string score_scheme = "tangent";
  double score_threshold = 0.0;
  double score_epsilon = 0.0;
  double score_c = 0.0;
  score->add_option("--model", score_model, "Model JSON path")->required();
  score->add_option("--queries", score_queries, "Query points CSV")->required();
  score->add_option("--threshold", score_threshold, "Flagging threshold")
      ->required();
  score->add_option("--out", score_out, "Results CSV path")->required();
  score->add_option("--scheme", score_scheme, "Weight scheme (default tangent)")
      ->check(CLI::IsMember(scheme_names));
  auto* score_eps_opt =
      score->add_option("--epsilon", score_epsilon, "Override model epsilon");
  auto* score_c_opt = score->add_option("--curvature-c", score_c,
                                        "Override model curvature constant");

  auto* bench = app.add_subcommand(
      "bench-sphere", "Run the sphere benchmark across all weight schemes");
  int bench_grid = 0;
  int bench_queries = 100;
  std::uint64_t bench_seed = 1;
  double bench_c = 2.0;
  double bench_eps_mult = 2.5;
  std::string bench_out, bench_emit;
  bench->add_option("--grid", bench_grid, "Grid points per axis")->required();
  bench->add_option("--num-queries", bench_queries,
                    "Number of random queries (default 100)");
  bench->add_option("--seed", bench_seed, "Query RNG seed (default 1)");
  bench->add_option("--curvature-c", bench_c,
                    "Curvature constant (default 2)");
  bench->add_option("--epsilon-mult", bench_eps_mult,
                    "Neighborhood radius as a multiple of the grid spacing "
                    "(default 2.5)");
  bench->add_option("--out", bench_out, "Summary CSV path")->required();
  bench->add_option("--emit-data", bench_emit,
                    "Also write points/images/queries CSVs to this directory");

  auto* compare = app.add_subcommand(
      "compare", "Extend a scalar function with all four methods");
  std::string cmp_model, cmp_function, cmp_queries, cmp_truth, cmp_out;
  double cmp_err = 1e-3;
  std::uint64_t cmp_seed = 1;
  compare->add_option("--model", cmp_model, "Model JSON path")->required();
  compare->add_option("--function", cmp_function,
                      "Scalar function values CSV, one per training point")
      ->required();
  compare->add_option("--queries", cmp_queries, "Query points CSV")->required();
  compare->add_option("--truth", cmp_truth,
                      "Optional true function values at the queries");
  compare->add_option("--err", cmp_err,
                      "Target rms training residual (default 1e-3)");
  compare->add_option("--seed", cmp_seed, "Subsampling seed (default 1)");
  compare->add_option("--out", cmp_out, "Output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (fit->parsed()) {
      return run_fit(fit_points, fit_images, fit_epsilon, fit_c, fit_out);
    }
    if (ext->parsed()) {
      ModelOverrides over;
      if (ext_eps_opt->count() > 0) over.epsilon = ext_epsilon;
      if (ext_c_opt->count() > 0) over.curvature_c = ext_c;
      return run_extend(ext_model, ext_queries, ext_scheme, over, ext_out);
    }
    if (score->parsed()) {
      ModelOverrides over;
      if (score_eps_opt->count() > 0) over.epsilon = score_epsilon;
      if (score_c_opt->count() > 0) over.curvature_c = score_c;
      return run_score(score_model, score_queries, score_scheme,
                       score_threshold, over, score_out);
    }
    if (bench->parsed()) {
      return run_bench(bench_grid, bench_queries, bench_seed, bench_c,
                       bench_eps_mult, bench_out, bench_emit);
    }
    if (compare->parsed()) {
      return run_compare(cmp_model, cmp_function, cmp_queries, cmp_truth,
                         cmp_err, cmp_seed, cmp_out);
    }
  } catch (const MapexError& e) {
    std::cerr << e.what() << "\n";
    return e.group() == mapex::error_group::input ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
