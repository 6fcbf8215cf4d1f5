#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "pmd/bench.hpp"
#include "pmd/dftcf.hpp"
#include "pmd/normal_approx.hpp"
#include "pmd/oracle.hpp"

using pmd::Matrix;

TEST_CASE("continuity-corrected approximation tracks the binomial", "[na]") {
  // n = 100 fair-coin trials; P(X = 50) = C(100,50)/2^100 ~ 0.0795892
  Matrix rows(100, 2, 0.5);
  pmd::SPM spm = pmd::validate_spm(std::move(rows));
  double exact = pmd::poisson_binomial_pmf(std::vector<double>(100, 0.5))[50];
  double approx = pmd::na_pmf_at(spm, {50, 50});
  CHECK_THAT(approx, Catch::Matchers::WithinAbs(exact, 2e-3));
  CHECK_THAT(approx, Catch::Matchers::WithinAbs(0.0795892, 1e-3));
}

TEST_CASE("the approximation stays a probability on tiny problems", "[na]") {
  pmd::SPM spm = example1_spm();
  pmd::PmfArray exact = pmd::pmf_full(spm);
  exact.for_each_support([&](const pmd::OutcomeVector& x, double) {
    double v = pmd::na_pmf_at(spm, x);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  });
}

TEST_CASE("approximate and exact answers converge with n on two categories", "[na]") {
  double mae_small = 0.0, mae_large = 0.0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (int n : {20, 200}) {
      pmd::SPM spm = pmd::random_spm(n, 2, seed);
      std::vector<double> probs;
      for (int i = 0; i < n; ++i) probs.push_back(spm(i, 0));
      std::vector<double> exact = pmd::poisson_binomial_pmf(probs);
      double mae = 0.0;
      for (int k = 0; k <= n; ++k) {
        double diff = std::fabs(pmd::na_pmf_at(spm, {k, n - k}) - exact[k]);
        mae = std::max(mae, diff);
      }
      (n == 20 ? mae_small : mae_large) += mae / 3.0;
    }
  }
  CHECK(mae_large < mae_small);
  CHECK(mae_large < 2e-3);
}

TEST_CASE("approximate cumulative probabilities behave like a cdf", "[na]") {
  pmd::SPM spm = pmd::random_spm(30, 3, 9);

  SECTION("the full box has nearly all the mass") {
    CHECK(pmd::na_cdf_at(spm, {30, 30}) >= 0.999);
  }

  SECTION("monotone in each coordinate") {
    double prev = -1.0;
    for (int c = 0; c <= 30; c += 5) {
      double v = pmd::na_cdf_at(spm, {c, 15});
      CHECK(v >= prev - 1e-9);
      prev = v;
    }
  }

  SECTION("close to the exact cdf near the mean on two categories") {
    pmd::SPM coin = pmd::random_spm(200, 2, 17);
    std::vector<double> probs;
    for (int i = 0; i < 200; ++i) probs.push_back(coin(i, 0));
    std::vector<double> pmf = pmd::poisson_binomial_pmf(probs);
    int mean = static_cast<int>(pmd::moments(coin).mu_star[0]);
    double exact = 0.0;
    for (int k = 0; k <= mean; ++k) exact += pmf[k];
    CHECK_THAT(pmd::na_cdf_at(coin, {mean}), Catch::Matchers::WithinAbs(exact, 2e-3));
  }

  SECTION("query points are validated") {
    CHECK_THROWS_AS(pmd::na_cdf_at(spm, {1, 1, 1}), pmd::dimension_error);
    CHECK_THROWS_AS(pmd::na_cdf_at(spm, {31, 0}), pmd::support_error);
  }
}

TEST_CASE("large problems stay close to the exact transform answer", "[na]") {
  pmd::SPM spm = pmd::random_spm(500, 3, 23);
  pmd::Moments mo = pmd::moments(spm);
  pmd::OutcomeVector x(3, 0);
  x[0] = static_cast<int>(std::lround(mo.mu_star[0]));
  x[1] = static_cast<int>(std::lround(mo.mu_star[1]));
  x[2] = 500 - x[0] - x[1];
  REQUIRE(x[2] >= 0);
  double exact = pmd::pmf_at(spm, x);
  double approx = pmd::na_pmf_at(spm, x);
  CHECK_THAT(approx, Catch::Matchers::WithinAbs(exact, 1e-4));
  CHECK(exact > 0.0);
}
