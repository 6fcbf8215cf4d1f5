#pragma once

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pmd/errors.hpp"
#include "pmd/matrix.hpp"

namespace pmd {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim surrounding blanks
    std::size_t a = field.find_first_not_of(" \t\r");
    std::size_t b = field.find_last_not_of(" \t\r");
    fields.push_back(a == std::string::npos ? "" : field.substr(a, b - a + 1));
  }
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

inline double parse_double(const std::string& s, const std::string& context) {
  if (s.empty()) throw validation_error(context + ": empty numeric field");
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw validation_error(context + ": cannot parse '" + s + "' as a number");
  return v;
}

inline long parse_long(const std::string& s, const std::string& context) {
  if (s.empty()) throw validation_error(context + ": empty integer field");
  char* end = nullptr;
  long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0')
    throw validation_error(context + ": cannot parse '" + s + "' as an integer");
  return v;
}

// Reads a rectangular numeric CSV file. All rows must have the same width.
inline Matrix read_csv_matrix(const std::string& path, bool skip_header = false) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && skip_header) continue;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_csv_line(line);
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields)
      row.push_back(parse_double(f, path + ":" + std::to_string(lineno)));
    if (!rows.empty() && row.size() != rows.front().size())
      throw validation_error(path + ":" + std::to_string(lineno) +
                             ": inconsistent column count");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw validation_error(path + ": no data rows");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

}  // namespace pmd
