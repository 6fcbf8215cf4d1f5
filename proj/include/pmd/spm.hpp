#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "pmd/csv.hpp"
#include "pmd/errors.hpp"
#include "pmd/matrix.hpp"

namespace pmd {

// A point of the support set: length-m nonnegative counts summing to n.
using OutcomeVector = std::vector<int>;

constexpr double kDefaultRowTol = 1e-6;

// Success probability matrix: n trials (rows) over m categories (columns),
// each row a probability vector. Construct through validate_spm so the row
// constraints always hold.
class SPM {
public:
  int n() const { return static_cast<int>(entries_.rows()); }
  int m() const { return static_cast<int>(entries_.cols()); }
  double operator()(std::size_t i, std::size_t j) const { return entries_(i, j); }
  const Matrix& entries() const { return entries_; }
  const double* row(std::size_t i) const { return entries_.row_ptr(i); }

  friend SPM validate_spm(Matrix raw, double row_tol);

private:
  explicit SPM(Matrix entries) : entries_(std::move(entries)) {}
  Matrix entries_;
};

// Validates and renormalizes a raw probability matrix. Rows whose sum is off
// by more than row_tol are rejected; rows within tolerance are rescaled so the
// left-to-right machine sum is exactly 1.
inline SPM validate_spm(Matrix raw, double row_tol = kDefaultRowTol) {
  const std::size_t n = raw.rows();
  const std::size_t m = raw.cols();
  if (n < 1) throw dimension_error("SPM needs at least 1 row");
  if (m < 2) throw dimension_error("SPM needs at least 2 categories, got " +
                                   std::to_string(m));
  for (std::size_t i = 0; i < n; ++i) {
    double* row = raw.row_ptr(i);
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (!std::isfinite(row[j]))
        throw validation_error("SPM row " + std::to_string(i + 1) +
                               ": non-finite entry in column " + std::to_string(j + 1));
      if (row[j] < 0.0)
        throw validation_error("SPM row " + std::to_string(i + 1) +
                               ": negative entry in column " + std::to_string(j + 1));
      sum += row[j];
    }
    if (std::fabs(sum - 1.0) > row_tol)
      throw validation_error("SPM row " + std::to_string(i + 1) + ": entries sum to " +
                             std::to_string(sum) + ", expected 1 within tolerance " +
                             std::to_string(row_tol));
    if (sum != 1.0)
      for (std::size_t j = 0; j < m; ++j) row[j] /= sum;
    // Nudge the largest entry until the machine-order sum is exactly 1.
    for (int pass = 0; pass < 4; ++pass) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += row[j];
      if (s == 1.0) break;
      std::size_t k = 0;
      for (std::size_t j = 1; j < m; ++j)
        if (row[j] > row[k]) k = j;
      row[k] -= s - 1.0;
    }
  }
  return SPM(std::move(raw));
}

inline SPM load_spm_csv(const std::string& path, bool skip_header = false,
                        double row_tol = kDefaultRowTol) {
  return validate_spm(read_csv_matrix(path, skip_header), row_tol);
}

// Throws unless x is a support point of the PMD defined by spm.
inline void check_support(const SPM& spm, const OutcomeVector& x) {
  if (static_cast<int>(x.size()) != spm.m())
    throw dimension_error("outcome vector has " + std::to_string(x.size()) +
                          " entries, SPM has " + std::to_string(spm.m()) + " categories");
  long sum = 0;
  for (int c : x) {
    if (c < 0) throw support_error("outcome vector has a negative count");
    sum += c;
  }
  if (sum != spm.n())
    throw support_error("outcome counts sum to " + std::to_string(sum) +
                        ", expected n = " + std::to_string(spm.n()));
}

namespace detail {
template <typename Fn>
void walk_support_points(OutcomeVector& x, int m, int n, int axis, int used, Fn& fn) {
  if (axis == m - 1) {
    x[axis] = n - used;
    fn(const_cast<const OutcomeVector&>(x));
    return;
  }
  for (int c = 0; c <= n - used; ++c) {
    x[axis] = c;
    walk_support_points(x, m, n, axis + 1, used + c, fn);
  }
}
}  // namespace detail

// Visits every outcome vector with m nonnegative counts summing to n, in
// lexicographic order of the reduced coordinates. No grid allocation.
template <typename Fn>
void for_each_support_point(int n, int m, Fn&& fn) {
  if (n < 0 || m < 1) throw dimension_error("support walk needs n >= 0, m >= 1");
  OutcomeVector x(m, 0);
  detail::walk_support_points(x, m, n, 0, 0, fn);
}

// Mean vector and covariance matrix of the reduced count vector (the last
// category dropped).
struct Moments {
  std::vector<double> mu_star;  // length m-1
  Matrix sigma_star;            // (m-1) x (m-1), symmetric PSD
};

inline Moments moments(const SPM& spm) {
  const int n = spm.n();
  const int d = spm.m() - 1;
  Moments out;
  out.mu_star.assign(d, 0.0);
  out.sigma_star = Matrix(d, d, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* p = spm.row(i);
    for (int j = 0; j < d; ++j) {
      out.mu_star[j] += p[j];
      out.sigma_star(j, j) += p[j] * (1.0 - p[j]);
      for (int k = j + 1; k < d; ++k) out.sigma_star(j, k) -= p[j] * p[k];
    }
  }
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < j; ++k) out.sigma_star(j, k) = out.sigma_star(k, j);
  return out;
}

// Simultaneous row/column partition of an SPM into independent sub-PMDs.
struct BlockPartition {
  struct Block {
    std::vector<int> rows;  // 0-based row indices, ascending
    std::vector<int> cols;  // 0-based column indices, ascending
  };
  std::vector<Block> blocks;

  bool single_block() const { return blocks.size() == 1; }
};

// Finest simultaneous partition: connected components of the bipartite graph
// joining row i and column j whenever p_ij > zero_tol. Columns that touch no
// row (possible for zero columns) come out as row-less blocks.
inline BlockPartition detect_blocks(const SPM& spm, double zero_tol = 0.0) {
  const int n = spm.n();
  const int m = spm.m();
  // union-find over n row nodes followed by m column nodes
  std::vector<int> parent(n + m);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  auto unite = [&](int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      if (spm(i, j) > zero_tol) unite(i, n + j);

  std::vector<int> root_to_block(n + m, -1);
  BlockPartition part;
  // Scan columns first so block order follows column order.
  for (int j = 0; j < m; ++j) {
    int r = find(n + j);
    if (root_to_block[r] < 0) {
      root_to_block[r] = static_cast<int>(part.blocks.size());
      part.blocks.emplace_back();
    }
    part.blocks[root_to_block[r]].cols.push_back(j);
  }
  for (int i = 0; i < n; ++i) {
    int r = find(i);
    if (root_to_block[r] < 0) {
      root_to_block[r] = static_cast<int>(part.blocks.size());
      part.blocks.emplace_back();
    }
    part.blocks[root_to_block[r]].rows.push_back(i);
  }
  return part;
}

// Validates that a partition is consistent with the SPM: index sets partition
// rows and columns, and no mass lies outside the blocks.
inline void check_partition(const SPM& spm, const BlockPartition& part,
                            double zero_tol = 0.0) {
  const int n = spm.n();
  const int m = spm.m();
  std::vector<int> row_block(n, -1), col_block(m, -1);
  for (std::size_t b = 0; b < part.blocks.size(); ++b) {
    for (int i : part.blocks[b].rows) {
      if (i < 0 || i >= n || row_block[i] >= 0)
        throw dimension_error("block partition: bad or repeated row index");
      row_block[i] = static_cast<int>(b);
    }
    for (int j : part.blocks[b].cols) {
      if (j < 0 || j >= m || col_block[j] >= 0)
        throw dimension_error("block partition: bad or repeated column index");
      col_block[j] = static_cast<int>(b);
    }
  }
  for (int i = 0; i < n; ++i)
    if (row_block[i] < 0) throw dimension_error("block partition: row not covered");
  for (int j = 0; j < m; ++j)
    if (col_block[j] < 0) throw dimension_error("block partition: column not covered");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      if (spm(i, j) > zero_tol && row_block[i] != col_block[j])
        throw dimension_error("block partition: mass outside the blocks at row " +
                              std::to_string(i + 1) + ", column " + std::to_string(j + 1));
}

}  // namespace pmd
