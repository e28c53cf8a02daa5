#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace plcml {

// Shortest text form that still round-trips a double exactly (17 significant
// digits). Used for every numeric artifact so repeated runs are byte-identical.
std::string format_double(double v);

// Minimal CSV emitter with deterministic formatting.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  void header(const std::vector<std::string>& names);
  CsvWriter& cell(double v);
  CsvWriter& cell(long long v);
  CsvWriter& cell(const std::string& v);
  void end_row();
  void close();

 private:
  std::ofstream out_;
  bool row_open_ = false;
};

// Reads a numeric CSV; returns rows of doubles. If the first line fails to
// parse as numbers it is treated as a header and skipped.
std::vector<std::vector<double>> read_numeric_csv(const std::string& path);

}  // namespace plcml
