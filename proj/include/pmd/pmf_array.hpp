#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "pmd/errors.hpp"
#include "pmd/format.hpp"
#include "pmd/spm.hpp"

namespace pmd {

// Default cap on dense pmf storage, in cells (doubles).
constexpr std::uint64_t kDefaultMemCapCells = std::uint64_t(1) << 28;

// Negative values closer to zero than this are treated as transform noise.
constexpr double kNegativeClampTol = 1e-10;

// (n+1)^(m-1), saturating at uint64 max.
inline std::uint64_t dense_grid_cells(int n, int m) {
  const std::uint64_t base = static_cast<std::uint64_t>(n) + 1;
  std::uint64_t cells = 1;
  for (int j = 0; j + 1 < m; ++j) {
    if (cells > std::numeric_limits<std::uint64_t>::max() / base)
      return std::numeric_limits<std::uint64_t>::max();
    cells *= base;
  }
  return cells;
}

// Number of support points h = C(n+m-1, m-1), saturating at uint64 max.
inline std::uint64_t support_size(int n, int m) {
  unsigned __int128 acc = 1;
  for (int j = 1; j < m; ++j) {
    acc = acc * static_cast<unsigned>(n + j) / static_cast<unsigned>(j);
    if (acc > std::numeric_limits<std::uint64_t>::max())
      return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(acc);
}

// What to try instead when the dense grid does not fit in memory.
inline std::string infeasibility_advice(int n, int m) {
  if (m >= 6 && m <= 20 && n <= 500)
    return "use SIM (m moderate, n small): simulation with a batch size b "
           "around 1e6 computes the pmf accurately";
  return "use NA (n large): the normal approximation computes the pmf "
         "efficiently with enough accuracy";
}

// Throws infeasible_error (with method advice) unless the dense grid for
// (n, m) fits strictly inside the cell cap. Strict: a grid that exactly
// reaches the cap already leaves no room for the transform's complex buffer.
inline void require_grid_within_cap(int n, int m, std::uint64_t mem_cap_cells) {
  const std::uint64_t cells = dense_grid_cells(n, m);
  if (cells >= mem_cap_cells)
    throw infeasible_error("dense pmf grid needs " + std::to_string(cells) +
                               " cells, cap is " + std::to_string(mem_cap_cells) +
                               "; " + infeasibility_advice(n, m),
                           cells, mem_cap_cells, infeasibility_advice(n, m));
}

// Dense pmf over the reduced support grid {0..n}^(m-1), row-major with the
// first reduced axis slowest. Cells with coordinate sum > n are off-support
// and held at exact zero.
class PmfArray {
public:
  PmfArray(int n, int m, std::uint64_t mem_cap_cells = kDefaultMemCapCells)
      : n_(n), m_(m), clamped_mass_(0.0) {
    if (n < 1 || m < 2) throw dimension_error("pmf grid needs n >= 1 and m >= 2");
    require_grid_within_cap(n, m, mem_cap_cells);
    values_.assign(static_cast<std::size_t>(dense_grid_cells(n, m)), 0.0);
  }

  int n() const { return n_; }
  int m() const { return m_; }
  std::size_t cells() const { return values_.size(); }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  // Flat index of a reduced point (first m-1 coordinates of an outcome).
  std::size_t index_reduced(const int* xstar) const {
    std::size_t idx = 0;
    for (int j = 0; j + 1 < m_; ++j) {
      if (xstar[j] < 0 || xstar[j] > n_)
        throw support_error("reduced coordinate out of range [0, n]");
      idx = idx * (n_ + 1) + static_cast<std::size_t>(xstar[j]);
    }
    return idx;
  }

  double& cell(const std::vector<int>& xstar) { return values_[index_reduced(xstar.data())]; }
  double cell(const std::vector<int>& xstar) const {
    return values_[index_reduced(xstar.data())];
  }

  // pmf value at a full outcome vector (length m, summing to n).
  double prob(const OutcomeVector& x) const {
    if (static_cast<int>(x.size()) != m_)
      throw dimension_error("outcome vector length does not match category count");
    long sum = 0;
    for (int c : x) {
      if (c < 0) throw support_error("outcome vector has a negative count");
      sum += c;
    }
    if (sum != n_)
      throw support_error("outcome counts sum to " + std::to_string(sum) +
                          ", expected n = " + std::to_string(n_));
    return values_[index_reduced(x.data())];
  }

  // Visits every support point in index order as (full outcome, value).
  template <typename Fn>
  void for_each_support(Fn&& fn) const {
    OutcomeVector x(m_, 0);
    walk_support(x, 0, 0, 0, fn);
  }

  double total_mass() const {
    double s = 0.0;
    for_each_support([&](const OutcomeVector&, double p) { s += p; });
    return s;
  }

  // Zeroes small negative transform noise; anything more negative than the
  // tolerance means the computation itself went wrong.
  void clamp_negatives(double tol = kNegativeClampTol) {
    double clamped = 0.0;
    for (double& v : values_) {
      if (v < 0.0) {
        if (v <= -tol)
          throw numerical_error("pmf cell at " + fmt_full(v) +
                                " is beyond the negative-noise tolerance " + fmt_full(tol));
        clamped -= v;
        v = 0.0;
      }
    }
    clamped_mass_ += clamped;
  }

  // Forces off-support cells (coordinate sum > n) to exact zero.
  void zero_off_support() {
    OutcomeVector xstar(m_ - 1, 0);
    zero_walk(xstar, 0, 0);
  }

  // Total absolute mass removed by clamp_negatives, for diagnostics.
  double clamped_mass() const { return clamped_mass_; }

private:
  template <typename Fn>
  void walk_support(OutcomeVector& x, int axis, int used, std::size_t idx, Fn& fn) const {
    if (axis == m_ - 1) {
      x[axis] = n_ - used;
      fn(const_cast<const OutcomeVector&>(x), values_[idx]);
      return;
    }
    for (int c = 0; c <= n_ - used; ++c) {
      x[axis] = c;
      walk_support(x, axis + 1, used + c, idx * (n_ + 1) + c, fn);
    }
  }

  void zero_walk(OutcomeVector& xstar, int axis, int used) {
    if (axis == m_ - 1) {
      if (used > n_) values_[index_reduced(xstar.data())] = 0.0;
      return;
    }
    for (int c = 0; c <= n_; ++c) {
      xstar[axis] = c;
      if (used + c > n_) {
        // whole subtree is off-support
        zero_subtree(xstar, axis + 1);
      } else {
        zero_walk(xstar, axis + 1, used + c);
      }
    }
  }

  void zero_subtree(OutcomeVector& xstar, int axis) {
    if (axis == m_ - 1) {
      values_[index_reduced(xstar.data())] = 0.0;
      return;
    }
    for (int c = 0; c <= n_; ++c) {
      xstar[axis] = c;
      zero_subtree(xstar, axis + 1);
    }
  }

  int n_, m_;
  std::vector<double> values_;
  double clamped_mass_;
};

// --- serialization ---------------------------------------------------------

// CSV export: support cells only, m-1 reduced index columns then p.
inline void write_pmf_csv(const PmfArray& pmf, std::FILE* f) {
  for (int j = 1; j < pmf.m(); ++j) std::fprintf(f, "x%d,", j);
  std::fprintf(f, "p\n");
  pmf.for_each_support([&](const OutcomeVector& x, double p) {
    for (int j = 0; j + 1 < pmf.m(); ++j) std::fprintf(f, "%d,", x[j]);
    std::fprintf(f, "%s\n", fmt_full(p).c_str());
  });
}

inline void save_pmf_csv(const PmfArray& pmf, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw validation_error("cannot open " + path + " for writing");
  write_pmf_csv(pmf, f);
  std::fclose(f);
}

// Binary export: magic "PMD1", u32 n, u32 m, then the dense grid as f64,
// everything little-endian, grid in index order.
inline void save_pmf_bin(const PmfArray& pmf, const std::string& path) {
  static_assert(std::endian::native == std::endian::little,
                "binary pmf export assumes a little-endian host");
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw validation_error("cannot open " + path + " for writing");
  const char magic[4] = {'P', 'M', 'D', '1'};
  std::uint32_t n = static_cast<std::uint32_t>(pmf.n());
  std::uint32_t m = static_cast<std::uint32_t>(pmf.m());
  bool ok = std::fwrite(magic, 1, 4, f) == 4 && std::fwrite(&n, 4, 1, f) == 1 &&
            std::fwrite(&m, 4, 1, f) == 1 &&
            std::fwrite(pmf.data(), 8, pmf.cells(), f) == pmf.cells();
  std::fclose(f);
  if (!ok) throw validation_error("short write to " + path);
}

inline PmfArray load_pmf_bin(const std::string& path,
                             std::uint64_t mem_cap_cells = kDefaultMemCapCells) {
  static_assert(std::endian::native == std::endian::little,
                "binary pmf import assumes a little-endian host");
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw validation_error("cannot open " + path);
  char magic[4];
  std::uint32_t n = 0, m = 0;
  if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, "PMD1", 4) != 0) {
    std::fclose(f);
    throw validation_error(path + ": not a pmf file (bad magic)");
  }
  if (std::fread(&n, 4, 1, f) != 1 || std::fread(&m, 4, 1, f) != 1) {
    std::fclose(f);
    throw validation_error(path + ": truncated header");
  }
  PmfArray pmf(static_cast<int>(n), static_cast<int>(m), mem_cap_cells);
  if (std::fread(pmf.data(), 8, pmf.cells(), f) != pmf.cells()) {
    std::fclose(f);
    throw validation_error(path + ": truncated payload");
  }
  std::fclose(f);
  return pmf;
}

}  // namespace pmd
