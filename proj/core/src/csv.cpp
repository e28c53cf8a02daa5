#include "plcml/csv.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace plcml {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
  if (!out_) throw std::runtime_error("cannot open for writing: " + path);
}

void CsvWriter::header(const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out_ << ',';
    out_ << names[i];
  }
  out_ << '\n';
}

CsvWriter& CsvWriter::cell(double v) {
  if (row_open_) out_ << ',';
  out_ << format_double(v);
  row_open_ = true;
  return *this;
}

CsvWriter& CsvWriter::cell(long long v) {
  if (row_open_) out_ << ',';
  out_ << v;
  row_open_ = true;
  return *this;
}

CsvWriter& CsvWriter::cell(const std::string& v) {
  if (row_open_) out_ << ',';
  out_ << v;
  row_open_ = true;
  return *this;
}

void CsvWriter::end_row() {
  out_ << '\n';
  row_open_ = false;
}

void CsvWriter::close() { out_.close(); }

std::vector<std::vector<double>> read_numeric_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool ok = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        const double v = std::stod(cell, &pos);
        while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
        if (pos != cell.size()) {
          ok = false;
          break;
        }
        row.push_back(v);
      } catch (const std::exception&) {
        ok = false;
        break;
      }
    }
    if (!ok) {
      if (first) {
        first = false;
        continue;  // header line
      }
      throw std::runtime_error("non-numeric CSV row in " + path);
    }
    first = false;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace plcml
