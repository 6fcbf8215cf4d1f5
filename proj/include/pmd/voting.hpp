#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pmd/dftcf.hpp"
#include "pmd/errors.hpp"
#include "pmd/normal_approx.hpp"
#include "pmd/pmf_array.hpp"
#include "pmd/simulation.hpp"
#include "pmd/spm.hpp"

namespace pmd {

enum class VoteMethod { exact, na, sim };

struct VoteOptions {
  std::uint64_t b = 100000;   // sim batch size
  std::uint64_t seed = 1;     // sim seed
  unsigned threads = 1;
  std::uint64_t mem_cap_cells = kDefaultMemCapCells;
  double na_tol = kNaTol;
};

struct WinnerReport {
  std::vector<double> winner_probs;  // length m
  double tie_prob = 0.0;             // 1 - sum of winner probabilities
};

namespace detail {

// index of the strict unique maximizer of x, or -1 on a tie
inline int unique_argmax(const int* x, int m) {
  int best = 0;
  bool tied = false;
  for (int j = 1; j < m; ++j) {
    if (x[j] > x[best]) {
      best = j;
      tied = false;
    } else if (x[j] == x[best]) {
      tied = true;
    }
  }
  return tied ? -1 : best;
}

}  // namespace detail

// Probability that each category holds the strict maximum count ("wins the
// election"); anything without a unique maximizer counts as a tie.
inline WinnerReport winner_probabilities(const SPM& spm,
                                         VoteMethod method = VoteMethod::exact,
                                         const VoteOptions& opt = {}) {
  const int m = spm.m();
  WinnerReport report;
  report.winner_probs.assign(m, 0.0);

  switch (method) {
    case VoteMethod::exact: {
      const PmfArray pmf = pmf_full(spm, opt.threads, opt.mem_cap_cells);
      pmf.for_each_support([&](const OutcomeVector& x, double p) {
        const int w = detail::unique_argmax(x.data(), m);
        if (w >= 0) report.winner_probs[w] += p;
      });
      break;
    }
    case VoteMethod::na: {
      // normal-approximate pmf summed over each winning region
      const Moments mo = moments(spm);
      std::vector<double> center(mo.mu_star.size());
      for_each_support_point(spm.n(), m, [&](const OutcomeVector& x) {
        const int w = detail::unique_argmax(x.data(), m);
        if (w < 0) return;
        for (std::size_t j = 0; j < center.size(); ++j) center[j] = x[j];
        report.winner_probs[w] +=
            mvn_rect_prob(mo.mu_star, mo.sigma_star, Rectangle::centered(center, 0.5),
                          kNaSeed, opt.na_tol)
                .prob;
      });
      break;
    }
    case VoteMethod::sim: {
      // streamed like sim_pmf_at: integer win counts per fixed chunk, so the
      // tally is identical for any thread count
      const std::vector<double> cum = detail::row_cumulative(spm);
      constexpr std::uint64_t kChunk = 1 << 16;
      const std::uint64_t chunks = (opt.b + kChunk - 1) / kChunk;
      std::vector<std::vector<std::uint64_t>> wins(
          chunks, std::vector<std::uint64_t>(m, 0));
      parallel_for(chunks, opt.threads, [&](std::size_t c) {
        const std::uint64_t begin = c * kChunk;
        const std::uint64_t end = std::min(opt.b, begin + kChunk);
        std::vector<std::int32_t> counts(m);
        for (std::uint64_t r = begin; r < end; ++r) {
          detail::simulate_draw(cum, spm.n(), m, opt.seed, r, counts.data());
          const int w = detail::unique_argmax(counts.data(), m);
          if (w >= 0) ++wins[c][w];
        }
      });
      for (const auto& chunk_wins : wins)
        for (int j = 0; j < m; ++j) report.winner_probs[j] += chunk_wins[j];
      for (int j = 0; j < m; ++j)
        report.winner_probs[j] /= static_cast<double>(opt.b);
      break;
    }
  }

  double total = 0.0;
  for (double w : report.winner_probs) total += w;
  report.tie_prob = 1.0 - total;
  return report;
}

struct ModeResult {
  OutcomeVector x;
  double p = 0.0;
};

// Support point of maximal exact pmf; ties go to the lexicographically
// smallest reduced vector (the iteration order).
inline ModeResult mode_from_pmf(const PmfArray& pmf) {
  ModeResult best;
  best.p = -1.0;
  pmf.for_each_support([&](const OutcomeVector& x, double p) {
    if (p > best.p) {
      best.p = p;
      best.x = x;
    }
  });
  return best;
}

inline ModeResult mode(const SPM& spm, unsigned threads = 1,
                       std::uint64_t mem_cap_cells = kDefaultMemCapCells) {
  return mode_from_pmf(pmf_full(spm, threads, mem_cap_cells));
}

// Support point whose pmf value is the q-quantile of all pmf values: the
// smallest value still >= the quantile threshold, lexicographic on ties.
// q -> 1 recovers the mode.
inline ModeResult q_mode_from_pmf(const PmfArray& pmf, double q) {
  if (!(q > 0.0 && q < 1.0))
    throw validation_error("q must lie strictly between 0 and 1, got " +
                           std::to_string(q));
  std::vector<double> values;
  values.reserve(support_size(pmf.n(), pmf.m()));
  pmf.for_each_support([&](const OutcomeVector&, double p) { values.push_back(p); });
  std::sort(values.begin(), values.end());
  const std::size_t h = values.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(h)));
  rank = std::min(std::max<std::size_t>(rank, 1), h);
  const double threshold = values[rank - 1];

  ModeResult best;
  bool found = false;
  pmf.for_each_support([&](const OutcomeVector& x, double p) {
    if (p == threshold && !found) {
      best.x = x;
      best.p = p;
      found = true;
    }
  });
  return best;
}

inline ModeResult q_mode(const SPM& spm, double q, unsigned threads = 1,
                         std::uint64_t mem_cap_cells = kDefaultMemCapCells) {
  return q_mode_from_pmf(pmf_full(spm, threads, mem_cap_cells), q);
}

}  // namespace pmd
