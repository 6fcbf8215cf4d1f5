#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pmd/errors.hpp"
#include "pmd/pmf_array.hpp"
#include "pmd/spm.hpp"

namespace pmd {

// Brute-force pmf by summing the probability of every one of the m^n category
// assignments. Exponential, so only for cross-checking small cases; shares no
// math with the transform-based path.
inline PmfArray enumerate_pmf(const SPM& spm, std::uint64_t max_assignments = 10000000,
                              std::uint64_t mem_cap_cells = kDefaultMemCapCells) {
  const int n = spm.n();
  const int m = spm.m();
  double log_total = n * std::log(static_cast<double>(m));
  if (log_total > std::log(static_cast<double>(max_assignments)) + 1e-9)
    throw validation_error("enumeration would visit m^n > " +
                           std::to_string(max_assignments) + " assignments");
  PmfArray pmf(n, m, mem_cap_cells);

  // Odometer over assignments (j_1..j_n), least-significant digit last.
  // prefix[r] is the probability of the first r digits; counts tracks the
  // reduced count vector of the current assignment.
  std::vector<int> digits(n, 0), counts(m - 1, 0);
  std::vector<double> prefix(static_cast<std::size_t>(n) + 1);
  prefix[0] = 1.0;
  for (int r = 0; r < n; ++r) prefix[r + 1] = prefix[r] * spm(r, 0);
  counts[0] = n;  // all digits start at category 0 (m >= 2, so column 0 is reduced)

  for (;;) {
    pmf.cell(counts) += prefix[n];
    int r = n - 1;
    while (r >= 0 && digits[r] == m - 1) {
      digits[r] = 0;  // leaving category m-1 (untracked), entering category 0
      ++counts[0];
      --r;
    }
    if (r < 0) break;
    --counts[digits[r]];  // loop guard guarantees digits[r] < m-1 here
    ++digits[r];
    if (digits[r] < m - 1) ++counts[digits[r]];
    for (int s = r; s < n; ++s) prefix[s + 1] = prefix[s] * spm(s, digits[s]);
  }
  return pmf;
}

// Poisson binomial pmf (m = 2 margin case) by direct convolution: fold in one
// trial at a time. probs[i] is the success probability of trial i; out[k] is
// P(k successes).
inline std::vector<double> poisson_binomial_pmf(const std::vector<double>& probs) {
  const int n = static_cast<int>(probs.size());
  if (n < 1) throw dimension_error("poisson binomial needs at least one trial");
  for (double p : probs)
    if (!(p >= 0.0 && p <= 1.0))
      throw validation_error("poisson binomial probability outside [0, 1]");
  std::vector<double> out(static_cast<std::size_t>(n) + 1, 0.0);
  out[0] = 1.0;
  for (int i = 0; i < n; ++i) {
    const double p = probs[i];
    for (int k = i + 1; k >= 1; --k) out[k] = out[k] * (1.0 - p) + out[k - 1] * p;
    out[0] *= 1.0 - p;
  }
  return out;
}

}  // namespace pmd
