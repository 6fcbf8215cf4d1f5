#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pmd/format.hpp"
#include "pmd/matrix.hpp"

namespace pmd {

// Minimal JSON emission for CLI output: numbers at full precision,
// non-finite values as null.
namespace json {

inline std::string num(double v) {
  if (!std::isfinite(v)) return "null";
  return fmt_full(v);
}

inline std::string num(long long v) { return std::to_string(v); }
inline std::string num(int v) { return std::to_string(v); }

inline std::string boolean(bool v) { return v ? "true" : "false"; }

inline std::string str(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
  return out;
}

inline std::string array(const std::vector<double>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += num(v[i]);
  }
  out += ']';
  return out;
}

inline std::string array(const std::vector<int>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += num(v[i]);
  }
  out += ']';
  return out;
}

// row-major array of arrays
inline std::string array(const Matrix& mat) {
  std::string out = "[";
  for (std::size_t i = 0; i < mat.rows(); ++i) {
    if (i) out += ',';
    out += '[';
    for (std::size_t j = 0; j < mat.cols(); ++j) {
      if (j) out += ',';
      out += num(mat(i, j));
    }
    out += ']';
  }
  out += ']';
  return out;
}

}  // namespace json
}  // namespace pmd
