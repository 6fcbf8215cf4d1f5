#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pmd {

// Base class for everything this library throws on bad input or failed numerics.
class error : public std::runtime_error {
public:
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Wrong shapes: m < 2, mismatched vector lengths, incompatible partitions.
class dimension_error : public error {
public:
  using error::error;
};

// Bad values: row sums off beyond tolerance, negative or non-finite entries,
// malformed input files.
class validation_error : public error {
public:
  using error::error;
};

// An outcome vector outside the support set of the distribution.
class support_error : public error {
public:
  using error::error;
};

// The requested computation would exceed the configured memory budget.
// Carries the method advice shown to CLI users.
class infeasible_error : public error {
public:
  infeasible_error(const std::string& msg, std::uint64_t required_cells,
                   std::uint64_t cap_cells, std::string advice)
      : error(msg), required_cells(required_cells), cap_cells(cap_cells),
        advice(std::move(advice)) {}

  std::uint64_t required_cells;
  std::uint64_t cap_cells;
  std::string advice;
};

// Numerics went wrong in a way tolerances cannot absorb (negative probability
// mass beyond the clamp, indefinite covariance, ...).
class numerical_error : public error {
public:
  using error::error;
};

}  // namespace pmd
