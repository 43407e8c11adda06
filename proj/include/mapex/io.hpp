#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mapex/types.hpp"

namespace mapex {

// Shortest representation with 17 significant digits: round-trips every
// finite double exactly.
std::string format_double(double value);

// JSON model document with keys format_version, ambient_dim, embed_dim,
// epsilon, curvature_c, points, images. Writing a model with any non-finite
// entry throws SerializationRejected; reading raises ParseFailure for
// malformed JSON and ValidationFailure for structurally sound documents with
// inconsistent contents.
void save_model(const TrainingModel& model, const std::string& path);
TrainingModel load_model(const std::string& path);

// Comma-separated numeric table with an optional single header line (detected
// by non-numeric fields). expected_dim > 0 enforces that column count;
// expected_dim == 0 infers it from the first data row.
Eigen::MatrixXd read_points_table(const std::string& path,
                                  Eigen::Index expected_dim);
void write_points_table(const Eigen::MatrixXd& table, const std::string& path,
                        const std::vector<std::string>& header = {});

// Extension results table. Header is exactly
//   query_id,y_1,...,y_d,score,neighbor_count,epsilon_used
// with query_id the 0-based input row.
void write_results(const std::vector<ExtensionResult>& results,
                   const std::string& path, Eigen::Index embed_dim);

}  // namespace mapex
