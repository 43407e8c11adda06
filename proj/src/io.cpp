#include "mapex/io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace mapex {

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) {
    ++begin;
  }
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) {
    --end;
  }
  return s.substr(begin, end - begin);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

bool parse_field(const std::string& raw, double& out) {
  const std::string field = trim(raw);
  if (field.empty()) return false;
  const char* start = field.c_str();
  char* end = nullptr;
  out = std::strtod(start, &end);
  return end == start + field.size();
}

void write_matrix_json(std::string& out, const Eigen::MatrixXd& m) {
  out += '[';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (i > 0) out += ',';
    out += '[';
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(m(i, j));
    }
    out += ']';
  }
  out += ']';
}

Eigen::MatrixXd read_matrix_json(const nlohmann::json& node, Eigen::Index cols,
                                 const std::string& name) {
  if (!node.is_array()) {
    fail(errc::parse_failure, name + " must be an array of rows");
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(node.size()), cols);
  Eigen::Index r = 0;
  for (const auto& row : node) {
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      fail(errc::validation_failure,
           name + " row " + std::to_string(r) + " does not have " +
               std::to_string(cols) + " entries");
    }
    Eigen::Index c = 0;
    for (const auto& value : row) {
      if (!value.is_number()) {
        fail(errc::parse_failure,
             name + " row " + std::to_string(r) + " holds a non-numeric entry");
      }
      m(r, c) = value.get<double>();
      ++c;
    }
    ++r;
  }
  return m;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    fail(errc::io_failure, "cannot open " + path + " for writing");
  }
  out << content;
  out.flush();
  if (!out) {
    fail(errc::io_failure, "failed writing " + path);
  }
}

}  // namespace

std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

void save_model(const TrainingModel& model, const std::string& path) {
  if (!model.points.allFinite() || !model.images.allFinite() ||
      !std::isfinite(model.epsilon) || !std::isfinite(model.curvature_c)) {
    fail(errc::serialization_rejected,
         "refusing to serialize non-finite values");
  }
  model.validate();
  std::string out;
  out.reserve(static_cast<std::size_t>(
      32 * (model.points.size() + model.images.size()) + 256));
  out += "{\n";
  out += "  \"format_version\": 1,\n";
  out += "  \"ambient_dim\": " + std::to_string(model.ambient_dim()) + ",\n";
  out += "  \"embed_dim\": " + std::to_string(model.embed_dim()) + ",\n";
  out += "  \"epsilon\": " + format_double(model.epsilon) + ",\n";
  out += "  \"curvature_c\": " + format_double(model.curvature_c) + ",\n";
  out += "  \"points\": ";
  write_matrix_json(out, model.points);
  out += ",\n  \"images\": ";
  write_matrix_json(out, model.images);
  out += "\n}\n";
  write_text_file(path, out);
}

TrainingModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(errc::io_failure, "cannot open " + path + " for reading");
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(errc::parse_failure, path + ": " + e.what());
  }
  TrainingModel model;
  Eigen::Index ambient = 0;
  Eigen::Index embed = 0;
  try {
    const auto version = doc.at("format_version").get<int>();
    if (version != 1) {
      fail(errc::validation_failure,
           "unsupported format_version " + std::to_string(version));
    }
    ambient = doc.at("ambient_dim").get<Eigen::Index>();
    embed = doc.at("embed_dim").get<Eigen::Index>();
    if (ambient < 1 || embed < 1) {
      fail(errc::validation_failure, "dimensions must be at least 1");
    }
    model.epsilon = doc.at("epsilon").get<double>();
    model.curvature_c = doc.at("curvature_c").get<double>();
    model.points = read_matrix_json(doc.at("points"), ambient, "points");
    model.images = read_matrix_json(doc.at("images"), embed, "images");
  } catch (const nlohmann::json::exception& e) {
    fail(errc::parse_failure, path + ": " + e.what());
  }
  if (model.points.rows() != model.images.rows()) {
    fail(errc::validation_failure,
         "points has " + std::to_string(model.points.rows()) +
             " rows but images has " + std::to_string(model.images.rows()));
  }
  model.validate();
  return model;
}

Eigen::MatrixXd read_points_table(const std::string& path,
                                  Eigen::Index expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(errc::io_failure, "cannot open " + path + " for reading");
  }
  std::vector<std::vector<double>> rows;
  Eigen::Index cols = expected_dim;
  std::string line;
  int line_number = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string content = trim(line);
    if (content.empty()) continue;
    const std::vector<std::string> fields = split_csv(content);
    std::vector<double> values(fields.size());
    bool numeric = true;
    std::size_t bad_field = 0;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (!parse_field(fields[i], values[i])) {
        numeric = false;
        bad_field = i;
        break;
      }
    }
    if (!numeric) {
      if (first_content_line) {
        first_content_line = false;  // header line
        continue;
      }
      fail(errc::parse_failure,
           path + " line " + std::to_string(line_number) + " field " +
               std::to_string(bad_field + 1) + " is not numeric");
    }
    first_content_line = false;
    if (cols == 0) {
      cols = static_cast<Eigen::Index>(values.size());
    }
    if (static_cast<Eigen::Index>(values.size()) != cols) {
      fail(errc::dimension_mismatch,
           path + " line " + std::to_string(line_number) + " has " +
               std::to_string(values.size()) + " fields, expected " +
               std::to_string(cols));
    }
    rows.push_back(std::move(values));
  }
  if (in.bad()) {
    fail(errc::io_failure, "failed reading " + path);
  }
  Eigen::MatrixXd table(static_cast<Eigen::Index>(rows.size()),
                        std::max<Eigen::Index>(cols, 0));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      table(static_cast<Eigen::Index>(i), j) =
          rows[i][static_cast<std::size_t>(j)];
    }
  }
  return table;
}

void write_points_table(const Eigen::MatrixXd& table, const std::string& path,
                        const std::vector<std::string>& header) {
  if (!header.empty() &&
      static_cast<Eigen::Index>(header.size()) != table.cols()) {
    fail(errc::validation_failure,
         "header has " + std::to_string(header.size()) + " fields for " +
             std::to_string(table.cols()) + " columns");
  }
  std::string out;
  if (!header.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i > 0) out += ',';
      out += header[i];
    }
    out += '\n';
  }
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    for (Eigen::Index j = 0; j < table.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(table(i, j));
    }
    out += '\n';
  }
  write_text_file(path, out);
}

void write_results(const std::vector<ExtensionResult>& results,
                   const std::string& path, Eigen::Index embed_dim) {
  if (embed_dim < 1) {
    fail(errc::validation_failure, "embed_dim must be at least 1");
  }
  std::string out = "query_id";
  for (Eigen::Index j = 0; j < embed_dim; ++j) {
    out += ",y_" + std::to_string(j + 1);
  }
  out += ",score,neighbor_count,epsilon_used\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const ExtensionResult& res = results[i];
    if (res.embedding.size() != embed_dim) {
      fail(errc::dimension_mismatch,
           "result " + std::to_string(i) + " has embedding dimension " +
               std::to_string(res.embedding.size()) + ", expected " +
               std::to_string(embed_dim));
    }
    out += std::to_string(i);
    for (Eigen::Index j = 0; j < embed_dim; ++j) {
      out += ',' + format_double(res.embedding(j));
    }
    out += ',' + format_double(res.score);
    out += ',' + std::to_string(res.neighbor_count);
    out += ',' + format_double(res.epsilon_used);
    out += '\n';
  }
  write_text_file(path, out);
}

}  // namespace mapex
