#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pmd/matrix.hpp"
#include "pmd/rng.hpp"
#include "pmd/spm.hpp"

// the 4-voter / 3-candidate worked example used throughout the tests
inline pmd::SPM example1_spm() {
  return pmd::validate_spm(pmd::Matrix{{0.1, 0.2, 0.7},
                                       {0.5, 0.2, 0.3},
                                       {0.4, 0.5, 0.1},
                                       {0.8, 0.1, 0.1}});
}

// the 10-voter / 3-candidate election example
inline pmd::SPM voting_spm() {
  return pmd::validate_spm(pmd::Matrix{{0.180, 0.333, 0.487},
                                       {0.035, 0.348, 0.617},
                                       {0.439, 0.211, 0.350},
                                       {0.159, 0.457, 0.384},
                                       {0.350, 0.380, 0.270},
                                       {0.294, 0.696, 0.010},
                                       {0.099, 0.422, 0.479},
                                       {0.102, 0.323, 0.575},
                                       {0.359, 0.456, 0.185},
                                       {0.483, 0.071, 0.446}});
}

inline double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

// multinomial pmf for identical-row reductions
inline double multinomial_pmf(const std::vector<int>& x, const std::vector<double>& p) {
  int n = 0;
  for (int c : x) n += c;
  double v = factorial(n);
  for (std::size_t j = 0; j < x.size(); ++j)
    v *= std::pow(p[j], x[j]) / factorial(x[j]);
  return v;
}
