#pragma once

#include <cstdint>
#include <vector>

#include "pmd/mvn.hpp"
#include "pmd/spm.hpp"

namespace pmd {

// The normal approximation has no tuning knobs at the call sites; the
// rectangle engine runs with this fixed seed so results are reproducible.
constexpr std::uint64_t kNaSeed = 8675309;
constexpr double kNaTol = 1e-6;

// Continuity-corrected normal approximation of the pmf: the probability that
// N(mu*, sigma*) lands in the half-width-1/2 box around the reduced outcome.
inline MvnResult na_pmf_detail(const SPM& spm, const OutcomeVector& x,
                               double tol = kNaTol, std::uint64_t seed = kNaSeed) {
  check_support(spm, x);
  const Moments mo = moments(spm);
  std::vector<double> center(mo.mu_star.size());
  for (std::size_t j = 0; j < center.size(); ++j) center[j] = x[j];
  return mvn_rect_prob(mo.mu_star, mo.sigma_star,
                       Rectangle::centered(center, 0.5), seed, tol);
}

inline double na_pmf_at(const SPM& spm, const OutcomeVector& x, double tol = kNaTol,
                        std::uint64_t seed = kNaSeed) {
  return na_pmf_detail(spm, x, tol, seed).prob;
}

// Normal-approximate cdf over the reduced coordinates: upper corner at
// x* + 1/2, unbounded below. xstar has m-1 entries in 0..n.
inline MvnResult na_cdf_detail(const SPM& spm, const std::vector<int>& xstar,
                               double tol = kNaTol, std::uint64_t seed = kNaSeed) {
  if (static_cast<int>(xstar.size()) != spm.m() - 1)
    throw dimension_error("cdf query point needs m-1 entries");
  for (int c : xstar)
    if (c < 0 || c > spm.n())
      throw support_error("cdf query coordinate outside 0..n");
  const Moments mo = moments(spm);
  std::vector<double> upper(xstar.size());
  for (std::size_t j = 0; j < upper.size(); ++j) upper[j] = xstar[j] + 0.5;
  return mvn_rect_prob(mo.mu_star, mo.sigma_star, Rectangle::lower_tail(upper),
                       seed, tol);
}

inline double na_cdf_at(const SPM& spm, const std::vector<int>& xstar,
                        double tol = kNaTol, std::uint64_t seed = kNaSeed) {
  return na_cdf_detail(spm, xstar, tol, seed).prob;
}

}  // namespace pmd
