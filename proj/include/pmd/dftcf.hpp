#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include "pmd/errors.hpp"
#include "pmd/pmf_array.hpp"
#include "pmd/spm.hpp"
#include "pmd/threading.hpp"

namespace pmd {

// Characteristic function of the reduced count vector sampled on the lattice
// l in {0..n}^(m-1) at angular step omega = 2*pi/(n+1). Same layout as
// PmfArray (row-major, first axis slowest).
struct CFGrid {
  int n = 0;
  int m = 0;
  double omega = 0.0;
  std::vector<std::complex<double>> values;
};

namespace detail {

// FFTW planning is not thread-safe and plans are reused across calls, so they
// live in a process-wide cache. FFTW_ESTIMATE keeps planning deterministic;
// FFTW_UNALIGNED lets one plan serve any buffer of the right shape.
inline fftw_plan forward_plan(int n, int m, std::complex<double>* buf) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(mu);
  const auto key = std::make_pair(n, m);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  std::vector<int> dims(static_cast<std::size_t>(m - 1), n + 1);
  fftw_plan plan = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(),
                                 reinterpret_cast<fftw_complex*>(buf),
                                 reinterpret_cast<fftw_complex*>(buf), FFTW_FORWARD,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!plan) throw numerical_error("transform planning failed");
  cache.emplace(key, plan);
  return plan;
}

}  // namespace detail

// Evaluates q(l) = prod_i [p_im + sum_{j<m} p_ij exp(i*omega*l_j)] over the
// whole lattice. Work is O(n * (n+1)^(m-1)) complex multiplies: the lattice is
// cut into runs over the fastest axis, and each run folds in all n rows.
inline CFGrid cf_grid(const SPM& spm, unsigned threads = 1,
                      std::uint64_t mem_cap_cells = kDefaultMemCapCells) {
  const int n = spm.n();
  const int m = spm.m();
  const int d = m - 1;
  require_grid_within_cap(n, m, mem_cap_cells);

  CFGrid grid;
  grid.n = n;
  grid.m = m;
  grid.omega = 2.0 * M_PI / (n + 1);
  const std::size_t cells = static_cast<std::size_t>(dense_grid_cells(n, m));
  grid.values.assign(cells, std::complex<double>(1.0, 0.0));

  // unit roots w[t] = exp(i*omega*t)
  std::vector<std::complex<double>> w(static_cast<std::size_t>(n) + 1);
  for (int t = 0; t <= n; ++t)
    w[t] = std::complex<double>(std::cos(grid.omega * t), std::sin(grid.omega * t));

  const std::size_t runs = cells / static_cast<std::size_t>(n + 1);
  parallel_for(runs, threads, [&](std::size_t run) {
    // decode the fixed lattice digits l_1..l_{d-1} of this run
    std::vector<int> lhead(d > 0 ? d - 1 : 0);
    std::size_t rest = run;
    for (int j = d - 2; j >= 0; --j) {
      lhead[j] = static_cast<int>(rest % (n + 1));
      rest /= n + 1;
    }
    std::complex<double>* slab = grid.values.data() + run * (n + 1);
    for (int i = 0; i < n; ++i) {
      const double* p = spm.row(i);
      std::complex<double> base(p[m - 1], 0.0);
      for (int j = 0; j + 1 < d; ++j) base += p[j] * w[lhead[j]];
      const double last = p[d - 1];
      for (int t = 0; t <= n; ++t) slab[t] *= base + last * w[t];
    }
  });
  return grid;
}

// Exact pmf: forward multidimensional DFT of the CF grid (the transform's
// exp(-2*pi*i*jk/N) kernel is exactly the inversion sum), scaled by
// (n+1)^-(m-1). Off-support cells are zeroed and negative round-off clamped.
inline PmfArray pmf_full(const SPM& spm, unsigned threads = 1,
                         std::uint64_t mem_cap_cells = kDefaultMemCapCells,
                         double eps_clamp = kNegativeClampTol) {
  const int n = spm.n();
  const int m = spm.m();
  CFGrid grid = cf_grid(spm, threads, mem_cap_cells);
  fftw_plan plan = detail::forward_plan(n, m, grid.values.data());
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(grid.values.data()),
                   reinterpret_cast<fftw_complex*>(grid.values.data()));

  PmfArray pmf(n, m, mem_cap_cells);
  const double scale = 1.0 / static_cast<double>(dense_grid_cells(n, m));
  double* out = pmf.data();
  const std::complex<double>* in = grid.values.data();
  parallel_for(pmf.cells(), threads,
               [&](std::size_t c) { out[c] = in[c].real() * scale; });
  pmf.zero_off_support();
  pmf.clamp_negatives(eps_clamp);
  return pmf;
}

// Exact pmf at one support point; builds the full array (a single inversion
// coefficient costs as much as the whole transform). Use DftcfEvaluator to
// amortize repeated queries.
inline double pmf_at(const SPM& spm, const OutcomeVector& x, unsigned threads = 1,
                     std::uint64_t mem_cap_cells = kDefaultMemCapCells) {
  check_support(spm, x);
  return pmf_full(spm, threads, mem_cap_cells).prob(x);
}

// P(X_j <= xstar_j for every reduced axis j); xstar has m-1 entries in 0..n.
// The last category is determined by the others and carries no constraint.
inline double cdf_from_pmf(const PmfArray& pmf, const std::vector<int>& xstar) {
  if (static_cast<int>(xstar.size()) != pmf.m() - 1)
    throw dimension_error("cdf query point needs m-1 entries");
  for (int c : xstar)
    if (c < 0 || c > pmf.n())
      throw support_error("cdf query coordinate outside 0..n");
  double sum = 0.0;
  pmf.for_each_support([&](const OutcomeVector& x, double p) {
    for (std::size_t j = 0; j < xstar.size(); ++j)
      if (x[j] > xstar[j]) return;
    sum += p;
  });
  return sum;
}

inline double cdf_at(const SPM& spm, const std::vector<int>& xstar, unsigned threads = 1,
                     std::uint64_t mem_cap_cells = kDefaultMemCapCells) {
  return cdf_from_pmf(pmf_full(spm, threads, mem_cap_cells), xstar);
}

// Caches the full pmf of one SPM across point and cdf queries.
class DftcfEvaluator {
public:
  explicit DftcfEvaluator(SPM spm, unsigned threads = 1,
                          std::uint64_t mem_cap_cells = kDefaultMemCapCells)
      : spm_(std::move(spm)), threads_(threads), mem_cap_cells_(mem_cap_cells) {}

  const SPM& spm() const { return spm_; }

  const PmfArray& pmf() {
    if (!pmf_) pmf_.emplace(pmf_full(spm_, threads_, mem_cap_cells_));
    return *pmf_;
  }

  double pmf_at(const OutcomeVector& x) {
    check_support(spm_, x);
    return pmf().prob(x);
  }

  double cdf_at(const std::vector<int>& xstar) { return cdf_from_pmf(pmf(), xstar); }

private:
  SPM spm_;
  unsigned threads_;
  std::uint64_t mem_cap_cells_;
  std::optional<PmfArray> pmf_;
};

// Joint pmf of a block-diagonal SPM as the product of per-block pmfs. Exactly
// equals pmf_at on the full matrix, but the largest grid is the largest block.
inline double pmf_blockwise(const SPM& spm, const BlockPartition& partition,
                            const OutcomeVector& x, unsigned threads = 1,
                            std::uint64_t mem_cap_cells = kDefaultMemCapCells) {
  check_partition(spm, partition);
  check_support(spm, x);
  double prod = 1.0;
  for (const auto& block : partition.blocks) {
    const int nk = static_cast<int>(block.rows.size());
    long block_count = 0;
    for (int j : block.cols) block_count += x[j];
    // every trial of the block lands in the block's columns
    if (block_count != nk) return 0.0;
    if (nk == 0) continue;  // row-less block of zero columns, factor 1
    if (block.cols.size() == 1) continue;  // single column: count is nk surely
    Matrix sub(block.rows.size(), block.cols.size(), 0.0);
    for (std::size_t a = 0; a < block.rows.size(); ++a)
      for (std::size_t b = 0; b < block.cols.size(); ++b)
        sub(a, b) = spm(block.rows[a], block.cols[b]);
    SPM sub_spm = validate_spm(std::move(sub), 1e-9);
    OutcomeVector sub_x(block.cols.size());
    for (std::size_t b = 0; b < block.cols.size(); ++b) sub_x[b] = x[block.cols[b]];
    prod *= pmf_at(sub_spm, sub_x, threads, mem_cap_cells);
  }
  return prod;
}

}  // namespace pmd
