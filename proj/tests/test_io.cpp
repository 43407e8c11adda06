#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <string>

#include "mapex/errors.hpp"
#include "mapex/io.hpp"
#include "mapex/sphere_bench.hpp"
#include "mapex/types.hpp"
#include "test_helpers.hpp"

using namespace mapex;

namespace {

TrainingModel tiny_model() {
  TrainingModel model;
  model.points.resize(1, 2);
  model.points << 0.25, -3.0;
  model.images.resize(1, 1);
  model.images << 42.0;
  model.epsilon = 0.5;
  model.curvature_c = 1.0;
  return model;
}

void check_roundtrip(const TrainingModel& model, const std::string& path) {
  save_model(model, path);
  const TrainingModel back = load_model(path);
  CHECK(back.points == model.points);
  CHECK(back.images == model.images);
  CHECK(back.epsilon == model.epsilon);
  CHECK(back.curvature_c == model.curvature_c);
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("format_double round-trips awkward values") {
  const double values[] = {0.0,     -0.0,          1.0 / 3.0, 1e-300,
                           1e300,   3.14159265358979323846, 5e-324,
                           -117.25, 6.02214076e23};
  for (double v : values) {
    const std::string s = format_double(v);
    // strtod, not std::stod: stod raises out_of_range for subnormals
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
  CHECK(format_double(1.0) == "1");
}

TEST_CASE("a one-point model survives a save/load cycle bit for bit") {
  test_util::TempDir dir;
  check_roundtrip(tiny_model(), dir.file("model.json"));
}

TEST_CASE("a sphere model survives a save/load cycle bit for bit") {
  const SphereDataset ds = make_sphere_dataset(8, 1, 3);
  TrainingModel model;
  model.points = ds.params;
  model.images = ds.images;
  model.epsilon = 2.5 * 3.14159265358979323846 / 7.0;
  model.curvature_c = 2.0;
  test_util::TempDir dir;
  check_roundtrip(model, dir.file("sphere.json"));
}

TEST_CASE("extreme magnitudes survive a save/load cycle exactly") {
  TrainingModel model;
  model.points.resize(2, 3);
  model.points << 1e-300, 1e300, -0.0, 3.14159265358979323846, 5e-324, -1e298;
  model.images.resize(2, 2);
  model.images << -5e-324, 0.1 + 0.2, 1.0 / 3.0, 2.2250738585072014e-308;
  model.epsilon = 1e-12;
  model.curvature_c = 7e101;
  test_util::TempDir dir;
  check_roundtrip(model, dir.file("extreme.json"));
}

TEST_CASE("models with non-finite entries are refused at save time") {
  test_util::TempDir dir;
  TrainingModel model = tiny_model();
  model.points(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK(test_util::throws_code(
      [&] { save_model(model, dir.file("bad.json")); },
      errc::serialization_rejected));
  TrainingModel inf_model = tiny_model();
  inf_model.images(0, 0) = std::numeric_limits<double>::infinity();
  CHECK(test_util::throws_code(
      [&] { save_model(inf_model, dir.file("bad2.json")); },
      errc::serialization_rejected));
}

TEST_CASE("loading a missing file reports an io failure") {
  test_util::TempDir dir;
  CHECK(test_util::throws_code([&] { load_model(dir.file("absent.json")); },
                               errc::io_failure));
}

TEST_CASE("truncated json is a parse failure") {
  test_util::TempDir dir;
  const std::string path = dir.file("model.json");
  save_model(tiny_model(), path);
  const std::string full = test_util::read_file(path);
  test_util::write_file(path, full.substr(0, full.size() / 2));
  CHECK(test_util::throws_code([&] { load_model(path); }, errc::parse_failure));
}

TEST_CASE("a missing key is a parse failure") {
  test_util::TempDir dir;
  const std::string path = dir.file("model.json");
  test_util::write_file(path,
                        "{\"format_version\":1,\"ambient_dim\":2,"
                        "\"embed_dim\":1,\"epsilon\":0.5,"
                        "\"points\":[[0.25,-3.0]],\"images\":[[42.0]]}");
  CHECK(test_util::throws_code([&] { load_model(path); }, errc::parse_failure));
}

TEST_CASE("an unknown format version is rejected") {
  test_util::TempDir dir;
  const std::string path = dir.file("model.json");
  save_model(tiny_model(), path);
  std::string text = test_util::read_file(path);
  const std::string needle = "\"format_version\": 1";
  const auto pos = text.find(needle);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, needle.size(), "\"format_version\": 2");
  test_util::write_file(path, text);
  CHECK(test_util::throws_code([&] { load_model(path); },
                               errc::validation_failure));
}

TEST_CASE("a crafted nonpositive epsilon fails validation on load") {
  test_util::TempDir dir;
  const std::string path = dir.file("model.json");
  test_util::write_file(path,
                        "{\"format_version\":1,\"ambient_dim\":2,"
                        "\"embed_dim\":1,\"epsilon\":-1.0,\"curvature_c\":1.0,"
                        "\"points\":[[0.25,-3.0]],\"images\":[[42.0]]}");
  CHECK(test_util::throws_code([&] { load_model(path); },
                               errc::validation_failure));
}

TEST_CASE("a crafted row-count mismatch fails validation on load") {
  test_util::TempDir dir;
  const std::string path = dir.file("model.json");
  test_util::write_file(
      path,
      "{\"format_version\":1,\"ambient_dim\":1,"
      "\"embed_dim\":1,\"epsilon\":0.5,\"curvature_c\":1.0,"
      "\"points\":[[0.25],[0.5]],\"images\":[[42.0]]}");
  CHECK(test_util::throws_code([&] { load_model(path); },
                               errc::validation_failure));
}

TEST_CASE("a points table parses with and without a header") {
  test_util::TempDir dir;
  const std::string plain = dir.file("plain.csv");
  test_util::write_file(plain, "1.5,2,3\n-4,5e-1,6\n");
  const Eigen::MatrixXd a = read_points_table(plain, 3);
  REQUIRE(a.rows() == 2);
  REQUIRE(a.cols() == 3);
  CHECK(a(0, 0) == 1.5);
  CHECK(a(1, 1) == 0.5);

  const std::string headed = dir.file("headed.csv");
  test_util::write_file(headed, "x,y,z\n1.5,2,3\n-4,5e-1,6\n");
  const Eigen::MatrixXd b = read_points_table(headed, 3);
  CHECK(b == a);
}

TEST_CASE("the column count is inferred when unspecified") {
  test_util::TempDir dir;
  const std::string path = dir.file("infer.csv");
  test_util::write_file(path, "phi,theta\n0.5,0.25\n1.5,0.75\n");
  const Eigen::MatrixXd t = read_points_table(path, 0);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 2);
}

TEST_CASE("carriage returns and trailing blank lines are tolerated") {
  test_util::TempDir dir;
  const std::string path = dir.file("crlf.csv");
  test_util::write_file(path, "a,b\r\n1,2\r\n3,4\r\n\r\n");
  const Eigen::MatrixXd t = read_points_table(path, 2);
  REQUIRE(t.rows() == 2);
  CHECK(t(1, 1) == 4.0);
}

TEST_CASE("a ragged row is reported with its line number") {
  test_util::TempDir dir;
  const std::string path = dir.file("ragged.csv");
  test_util::write_file(path, "1,2\n3,4,5\n");
  try {
    read_points_table(path, 2);
    FAIL("expected a dimension mismatch");
  } catch (const MapexError& e) {
    CHECK(e.code() == errc::dimension_mismatch);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("garbage past the first line is a parse failure") {
  test_util::TempDir dir;
  const std::string path = dir.file("garbage.csv");
  test_util::write_file(path, "1,2\n3,oops\n");
  try {
    read_points_table(path, 2);
    FAIL("expected a parse failure");
  } catch (const MapexError& e) {
    CHECK(e.code() == errc::parse_failure);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("an empty table file yields an empty table") {
  test_util::TempDir dir;
  const std::string path = dir.file("empty.csv");
  test_util::write_file(path, "");
  const Eigen::MatrixXd t = read_points_table(path, 2);
  CHECK(t.rows() == 0);
  CHECK(t.cols() == 2);
}

TEST_CASE("written tables read back exactly") {
  std::mt19937_64 rng(15);
  const Eigen::MatrixXd t = test_util::random_matrix(7, 4, rng);
  test_util::TempDir dir;
  const std::string path = dir.file("table.csv");
  write_points_table(t, path, {"a", "b", "c", "d"});
  const Eigen::MatrixXd back = read_points_table(path, 4);
  CHECK(back == t);
}

TEST_CASE("the results header names every embedding column") {
  test_util::TempDir dir;
  const std::string path = dir.file("results.csv");
  std::vector<ExtensionResult> results;
  ExtensionResult r;
  r.embedding.resize(2);
  r.embedding << 0.5, -1.5;
  r.score = 0.25;
  r.score_squared = 0.0625;
  r.neighbor_count = 4;
  r.epsilon_used = 0.5;
  results.push_back(r);
  write_results(results, path, 2);
  const auto lines = test_util::split_lines(test_util::read_file(path));
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == "query_id,y_1,y_2,score,neighbor_count,epsilon_used");
  const auto fields = test_util::split_fields(lines[1]);
  REQUIRE(fields.size() == 6);
  CHECK(fields[0] == "0");
  CHECK(std::stod(fields[1]) == 0.5);
  CHECK(std::stod(fields[2]) == -1.5);
  CHECK(std::stod(fields[3]) == 0.25);
  CHECK(fields[4] == "4");
  CHECK(std::stod(fields[5]) == 0.5);
}

TEST_CASE("a hundred results produce a hundred and one lines") {
  test_util::TempDir dir;
  const std::string path = dir.file("many.csv");
  std::vector<ExtensionResult> results;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    ExtensionResult r;
    r.embedding.resize(3);
    r.embedding << gauss(rng), gauss(rng), gauss(rng);
    r.score = std::abs(gauss(rng));
    r.score_squared = r.score * r.score;
    r.neighbor_count = 1 + (i % 9);
    r.epsilon_used = 0.25 * (1 + (i % 3));
    results.push_back(r);
  }
  write_results(results, path, 3);
  const auto lines = test_util::split_lines(test_util::read_file(path));
  CHECK(lines.size() == 101);
  // numeric body parses back as a table: id, 3 coordinates, score, count, eps
  const Eigen::MatrixXd parsed = read_points_table(path, 7);
  REQUIRE(parsed.rows() == 100);
  for (int i = 0; i < 100; ++i) {
    CHECK(parsed(i, 0) == static_cast<double>(i));
    CHECK(parsed(i, 1) == results[static_cast<std::size_t>(i)].embedding(0));
    CHECK(parsed(i, 5) ==
          static_cast<double>(results[static_cast<std::size_t>(i)].neighbor_count));
  }
}

TEST_CASE("results with the wrong embedding width are rejected") {
  test_util::TempDir dir;
  std::vector<ExtensionResult> results;
  ExtensionResult r;
  r.embedding.resize(3);
  r.embedding << 1.0, 2.0, 3.0;
  r.score = 0.0;
  r.score_squared = 0.0;
  r.neighbor_count = 1;
  r.epsilon_used = 1.0;
  results.push_back(r);
  CHECK(test_util::throws_code(
      [&] { write_results(results, dir.file("bad.csv"), 2); },
      errc::dimension_mismatch));
}

}  // TEST_SUITE
