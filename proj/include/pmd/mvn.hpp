#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "pmd/errors.hpp"
#include "pmd/matrix.hpp"
#include "pmd/normal.hpp"
#include "pmd/rng.hpp"

namespace pmd {

// Axis-aligned hyper-rectangle; bounds may be +-infinity.
struct Rectangle {
  std::vector<double> lower, upper;

  static Rectangle centered(const std::vector<double>& center, double half_width) {
    Rectangle r;
    r.lower.reserve(center.size());
    r.upper.reserve(center.size());
    for (double c : center) {
      r.lower.push_back(c - half_width);
      r.upper.push_back(c + half_width);
    }
    return r;
  }

  static Rectangle lower_tail(const std::vector<double>& upper) {
    Rectangle r;
    r.lower.assign(upper.size(), -std::numeric_limits<double>::infinity());
    r.upper = upper;
    return r;
  }
};

struct MvnResult {
  double prob = 0.0;
  double error = 0.0;      // estimated absolute error
  bool converged = true;   // false: budget exhausted before reaching tol
  int collapsed_dims = 0;  // zero-variance axes removed by the collapse rule
};

namespace detail {

// Gauss-Legendre nodes/weights on [-1,1], computed once by Newton iteration
// on the Legendre recurrence (no tabulated constants to get wrong).
inline std::vector<std::pair<double, double>> make_gauss_legendre(int n) {
  std::vector<std::pair<double, double>> nw(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double pk = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double step = p1 / dp;
      x -= step;
      if (std::fabs(step) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nw[i] = {x, w};
    nw[n - 1 - i] = {-x, w};
  }
  return nw;
}

inline const std::vector<std::pair<double, double>>& gl24() {
  static const auto nodes = make_gauss_legendre(24);
  return nodes;
}

// P(a1 < Z1 < b1, a2 < Z2 < b2) for standard bivariate normal with
// correlation rho, by integrating the conditional normal band along axis 1.
// Panels are refined around the points where the band edge crosses the
// diagonal, so the quadrature stays accurate for |rho| near 1.
inline double bvn_rect_std(double a1, double b1, double a2, double b2, double rho) {
  const double s = std::sqrt(std::max(0.0, (1.0 - rho) * (1.0 + rho)));
  if (s < 1e-8) {
    // perfectly correlated: Z2 = rho * Z1, intersect the two intervals
    double lo = std::max(a1, rho > 0 ? a2 : -b2);
    double hi = std::min(b1, rho > 0 ? b2 : -a2);
    if (!(hi > lo)) return 0.0;
    return std::max(0.0, norm_cdf(hi) - norm_cdf(lo));
  }
  const double lo = std::max(a1, -8.5), hi = std::min(b1, 8.5);
  if (!(hi > lo)) return 0.0;

  std::vector<double> cuts = {lo, hi};
  if (std::fabs(rho) > 1e-12) {
    const double width = 4.0 * s / std::fabs(rho);
    for (double c : {a2, b2}) {
      if (!std::isfinite(c)) continue;
      const double z = c / rho;
      for (double off : {-4.0 * width, -width, 0.0, width, 4.0 * width}) {
        double cut = z + off;
        if (cut > lo && cut < hi) cuts.push_back(cut);
      }
    }
  }
  std::sort(cuts.begin(), cuts.end());

  double total = 0.0;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double u = cuts[c], v = cuts[c + 1];
    if (v - u < 1e-14) continue;
    const int pieces = static_cast<int>(std::ceil(v - u));
    const double step = (v - u) / pieces;
    for (int piece = 0; piece < pieces; ++piece) {
      const double pu = u + piece * step;
      const double mid = pu + 0.5 * step, half = 0.5 * step;
      for (const auto& [node, weight] : gl24()) {
        const double z = mid + half * node;
        const double upper = norm_cdf((b2 - rho * z) / s);
        const double lower = std::isfinite(a2) ? norm_cdf((a2 - rho * z) / s) : 0.0;
        total += weight * half * norm_pdf(z) * std::max(0.0, upper - lower);
      }
    }
  }
  return std::min(1.0, std::max(0.0, total));
}

// first `count` primes, for the sqrt-prime lattice generating vector
inline std::vector<int> first_primes(int count) {
  std::vector<int> primes;
  for (int cand = 2; static_cast<int>(primes.size()) < count; ++cand) {
    bool ok = true;
    for (int p : primes) {
      if (p * p > cand) break;
      if (cand % p == 0) {
        ok = false;
        break;
      }
    }
    if (ok) primes.push_back(cand);
  }
  return primes;
}

struct MvnPrep {
  std::vector<int> keep;   // original axes still integrated over
  Matrix L;                // Cholesky factor of the kept submatrix
  double collapsed_factor; // product of collapse-rule indicator factors
  int collapsed_dims;
};

// Symmetry check, zero-variance collapse, and Cholesky factorization.
inline MvnPrep mvn_prepare(const std::vector<double>& mu, const Matrix& sigma,
                           const Rectangle& rect) {
  const int d = static_cast<int>(mu.size());
  if (static_cast<int>(sigma.rows()) != d || static_cast<int>(sigma.cols()) != d ||
      static_cast<int>(rect.lower.size()) != d ||
      static_cast<int>(rect.upper.size()) != d)
    throw dimension_error("mean, covariance, and rectangle dimensions disagree");
  for (int j = 0; j < d; ++j)
    if (!(rect.lower[j] <= rect.upper[j]))
      throw validation_error("rectangle has lower > upper on axis " +
                             std::to_string(j + 1));
  double scale = 1.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) scale = std::max(scale, std::fabs(sigma(i, j)));
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      if (std::fabs(sigma(i, j) - sigma(j, i)) > 1e-12 * scale)
        throw validation_error("covariance matrix is not symmetric");

  MvnPrep prep;
  prep.collapsed_factor = 1.0;
  prep.collapsed_dims = 0;
  prep.keep.resize(d);
  for (int j = 0; j < d; ++j) prep.keep[j] = j;

  for (;;) {
    const int k = static_cast<int>(prep.keep.size());
    prep.L = Matrix(k, k, 0.0);
    int degenerate = -1;
    for (int i = 0; i < k && degenerate < 0; ++i) {
      for (int j = 0; j <= i; ++j) {
        double acc = sigma(prep.keep[i], prep.keep[j]);
        for (int t = 0; t < j; ++t) acc -= prep.L(i, t) * prep.L(j, t);
        if (j < i) {
          prep.L(i, j) = prep.L(j, j) > 0.0 ? acc / prep.L(j, j) : 0.0;
        } else {
          if (acc < -1e-10)
            throw numerical_error("covariance matrix is indefinite (pivot " +
                                  std::to_string(acc) + ")");
          if (acc < 1e-12) {
            degenerate = i;
            break;
          }
          prep.L(i, i) = std::sqrt(acc);
        }
      }
    }
    if (degenerate < 0) return prep;
    // zero-variance axis: contributes 1 if the mean sits inside the
    // rectangle's extent on that axis, else 0, and drops out of the integral
    const int axis = prep.keep[degenerate];
    if (!(rect.lower[axis] <= mu[axis] && mu[axis] <= rect.upper[axis]))
      prep.collapsed_factor = 0.0;
    ++prep.collapsed_dims;
    prep.keep.erase(prep.keep.begin() + degenerate);
  }
}

}  // namespace detail

// Probability that N(mu, sigma) lands in rect, with an absolute-error
// estimate. Dimensions 0-2 use closed-form/quadrature paths (error far below
// any practical tol); higher dimensions use separation-of-variables
// quasi-Monte Carlo with 8 randomized lattice shifts, growing the lattice to
// 2^14 points before giving up and flagging the estimate as unconverged.
inline MvnResult mvn_rect_prob(const std::vector<double>& mu, const Matrix& sigma,
                               const Rectangle& rect, std::uint64_t seed = 0,
                               double tol = 1e-6) {
  detail::MvnPrep prep = detail::mvn_prepare(mu, sigma, rect);
  MvnResult res;
  res.collapsed_dims = prep.collapsed_dims;
  if (prep.collapsed_factor == 0.0) {
    res.prob = 0.0;
    res.error = 0.0;
    return res;
  }
  const int d = static_cast<int>(prep.keep.size());

  // centered integration limits for the kept axes
  std::vector<double> a(d), b(d);
  for (int i = 0; i < d; ++i) {
    a[i] = rect.lower[prep.keep[i]] - mu[prep.keep[i]];
    b[i] = rect.upper[prep.keep[i]] - mu[prep.keep[i]];
  }

  if (d == 0) {
    res.prob = 1.0;
    res.error = 0.0;
    return res;
  }
  if (d == 1) {
    const double s = prep.L(0, 0);
    res.prob = std::max(0.0, norm_cdf(b[0] / s) - norm_cdf(a[0] / s));
    res.error = 1e-14;
    return res;
  }
  if (d == 2) {
    const double s1 = prep.L(0, 0);
    const double s2 = std::hypot(prep.L(1, 0), prep.L(1, 1));
    const double rho = prep.L(1, 0) / s2;
    res.prob = detail::bvn_rect_std(a[0] / s1, b[0] / s1, a[1] / s2, b[1] / s2, rho);
    res.error = 1e-12;
    return res;
  }

  // Genz separation of variables over w in [0,1]^(d-1)
  auto cdf_or = [](double z) {
    return std::isfinite(z) ? norm_cdf(z) : (z > 0 ? 1.0 : 0.0);
  };
  const double d0 = cdf_or(a[0] / prep.L(0, 0));
  const double e0 = cdf_or(b[0] / prep.L(0, 0));

  std::vector<double> y(d - 1);
  auto integrand = [&](const double* w) {
    double dprev = d0, eprev = e0;
    double prod = eprev - dprev;
    for (int i = 1; i < d && prod > 0.0; ++i) {
      double u = dprev + w[i - 1] * (eprev - dprev);
      u = std::min(1.0 - 1e-16, std::max(1e-300, u));
      y[i - 1] = norm_quantile(u);
      double t = 0.0;
      for (int j = 0; j < i; ++j) t += prep.L(i, j) * y[j];
      const double li = prep.L(i, i);
      dprev = cdf_or((a[i] - t) / li);
      eprev = cdf_or((b[i] - t) / li);
      prod *= std::max(0.0, eprev - dprev);
    }
    return prod;
  };

  const std::vector<int> primes = detail::first_primes(d - 1);
  std::vector<double> q(d - 1);
  for (int j = 0; j + 1 < d; ++j) {
    double sq = std::sqrt(static_cast<double>(primes[j]));
    q[j] = sq - std::floor(sq);
  }

  constexpr int kRandomizations = 8;
  std::vector<double> w(d - 1), shift(d - 1), means(kRandomizations);
  MvnResult best;
  best.collapsed_dims = prep.collapsed_dims;
  best.converged = false;
  for (std::size_t points = 512; points <= (std::size_t(1) << 14); points *= 2) {
    for (int r = 0; r < kRandomizations; ++r) {
      for (int j = 0; j + 1 < d; ++j)
        shift[j] = Philox::u01(seed, static_cast<std::uint64_t>(r),
                               static_cast<std::uint64_t>(j));
      double acc = 0.0;
      for (std::size_t k = 1; k <= points; ++k) {
        for (int j = 0; j + 1 < d; ++j) {
          double v = k * q[j] + shift[j];
          w[j] = v - std::floor(v);
        }
        double f1 = integrand(w.data());
        for (int j = 0; j + 1 < d; ++j) w[j] = 1.0 - w[j];
        acc += 0.5 * (f1 + integrand(w.data()));
      }
      means[r] = acc / static_cast<double>(points);
    }
    double mean = 0.0;
    for (double v : means) mean += v;
    mean /= kRandomizations;
    double var = 0.0;
    for (double v : means) var += (v - mean) * (v - mean);
    var /= kRandomizations - 1;
    const double err = 3.0 * std::sqrt(var / kRandomizations);
    best.prob = std::min(1.0, std::max(0.0, mean));
    best.error = err;
    if (err <= tol) {
      best.converged = true;
      return best;
    }
  }
  return best;  // budget exhausted: best estimate, flagged unconverged
}

}  // namespace pmd
