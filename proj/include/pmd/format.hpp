#pragma once

#include <cstdio>
#include <string>

namespace pmd {

// Machine-readable number format: 17 significant digits round-trips any double.
inline std::string fmt_full(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// Human summaries use 4 decimals.
inline std::string fmt_human(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4f", x);
  return buf;
}

}  // namespace pmd
