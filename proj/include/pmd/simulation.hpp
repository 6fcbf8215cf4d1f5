#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "pmd/errors.hpp"
#include "pmd/rng.hpp"
#include "pmd/spm.hpp"
#include "pmd/threading.hpp"

namespace pmd {

namespace detail {

// cumulative row probabilities; the final column is exactly 1 because SPM
// rows sum to 1 in machine order
inline std::vector<double> row_cumulative(const SPM& spm) {
  const int n = spm.n(), m = spm.m();
  std::vector<double> cum(static_cast<std::size_t>(n) * m);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < m; ++j) {
      acc += spm(i, j);
      cum[static_cast<std::size_t>(i) * m + j] = acc;
    }
  }
  return cum;
}

// one PMD draw: counts of n categorical picks, one per row; the pick for
// (seed, draw r, row i) depends only on those indices, so any work split
// over draws reproduces the same batch
inline void simulate_draw(const std::vector<double>& cum, int n, int m,
                          std::uint64_t seed, std::uint64_t r, std::int32_t* counts) {
  for (int j = 0; j < m; ++j) counts[j] = 0;
  for (int i = 0; i < n; ++i) {
    const double u = Philox::u01(seed, r, static_cast<std::uint64_t>(i));
    const double* c = cum.data() + static_cast<std::size_t>(i) * m;
    int j = 0;
    while (j < m - 1 && u >= c[j]) ++j;
    ++counts[j];
  }
}

}  // namespace detail

// b independent PMD draws, row r generated from substream (seed, r, .)
struct SampleBatch {
  int n = 0, m = 0;
  std::uint64_t b = 0;
  std::uint64_t seed = 0;
  std::vector<std::int32_t> draws;  // b x m, row-major

  const std::int32_t* row(std::uint64_t r) const {
    return draws.data() + static_cast<std::size_t>(r) * m;
  }
};

inline SampleBatch sample(const SPM& spm, std::uint64_t b, std::uint64_t seed,
                          unsigned threads = 1) {
  if (b < 1) throw validation_error("sample needs b >= 1");
  SampleBatch batch;
  batch.n = spm.n();
  batch.m = spm.m();
  batch.b = b;
  batch.seed = seed;
  batch.draws.resize(static_cast<std::size_t>(b) * spm.m());
  const std::vector<double> cum = detail::row_cumulative(spm);
  parallel_for(b, threads, [&](std::size_t r) {
    detail::simulate_draw(cum, batch.n, batch.m, seed, r,
                          batch.draws.data() + r * static_cast<std::size_t>(batch.m));
  });
  return batch;
}

// expected-absolute-error bounds for the simulated pmf: single point
// sqrt(1/(2 pi b)), summed over the whole support sqrt(2(h-1)/(pi b))
struct SimBounds {
  double single_point = 0.0;
  double total = 0.0;
};

inline SimBounds sim_error_bounds(std::uint64_t b, std::uint64_t h) {
  if (b < 1 || h < 1) throw validation_error("error bounds need b >= 1 and h >= 1");
  SimBounds out;
  out.single_point = std::sqrt(1.0 / (2.0 * M_PI * static_cast<double>(b)));
  out.total = std::sqrt(2.0 * static_cast<double>(h - 1) / (M_PI * static_cast<double>(b)));
  return out;
}

struct SimEstimate {
  double prob = 0.0;   // s / b
  double bound = 0.0;  // expected absolute error sqrt(1/(2 pi b))
  std::uint64_t hits = 0;
  std::uint64_t b = 0;
};

// Streaming pmf estimate at one point: draws are generated chunk by chunk and
// never stored. Hit counts are integers, so the chunk merge is exact and the
// result is identical for any thread count.
inline SimEstimate sim_pmf_at(const SPM& spm, const OutcomeVector& x, std::uint64_t b,
                              std::uint64_t seed, unsigned threads = 1) {
  check_support(spm, x);
  if (b < 1) throw validation_error("sim_pmf_at needs b >= 1");
  const int m = spm.m();
  const std::vector<double> cum = detail::row_cumulative(spm);

  constexpr std::uint64_t kChunk = 1 << 16;
  const std::uint64_t chunks = (b + kChunk - 1) / kChunk;
  std::vector<std::uint64_t> chunk_hits(chunks, 0);
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::uint64_t begin = c * kChunk;
    const std::uint64_t end = std::min(b, begin + kChunk);
    std::vector<std::int32_t> counts(m);
    std::uint64_t hits = 0;
    for (std::uint64_t r = begin; r < end; ++r) {
      detail::simulate_draw(cum, spm.n(), m, seed, r, counts.data());
      bool match = true;
      for (int j = 0; j < m; ++j)
        if (counts[j] != x[j]) {
          match = false;
          break;
        }
      hits += match;
    }
    chunk_hits[c] = hits;
  });

  SimEstimate est;
  est.b = b;
  for (std::uint64_t h : chunk_hits) est.hits += h;
  est.prob = static_cast<double>(est.hits) / static_cast<double>(b);
  est.bound = sim_error_bounds(b, 1).single_point;
  return est;
}

// CSV export: one draw per row, m count columns.
inline void write_samples_csv(const SampleBatch& batch, std::FILE* f) {
  for (int j = 1; j <= batch.m; ++j)
    std::fprintf(f, "x%d%c", j, j == batch.m ? '\n' : ',');
  for (std::uint64_t r = 0; r < batch.b; ++r) {
    const std::int32_t* row = batch.row(r);
    for (int j = 0; j < batch.m; ++j)
      std::fprintf(f, "%d%c", row[j], j == batch.m - 1 ? '\n' : ',');
  }
}

inline void save_samples_csv(const SampleBatch& batch, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw validation_error("cannot open " + path + " for writing");
  write_samples_csv(batch, f);
  std::fclose(f);
}

}  // namespace pmd
