#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace projmc2::csv {

struct Table {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};

/// Reads a numeric CSV with one header row. Parse errors name the file and line.
Table read_numeric(const std::filesystem::path& path);

/// Writes a header row and values with round-trip precision.
void write_numeric(const std::filesystem::path& path, const std::vector<std::string>& header,
                   const Eigen::MatrixXd& values);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// `prefix1, prefix2, ...`
std::vector<std::string> numbered(const std::string& prefix, Eigen::Index count);

}  // namespace projmc2::csv
