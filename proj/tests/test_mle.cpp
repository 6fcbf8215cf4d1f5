#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "helpers.hpp"
#include "pmd/aggregate_mle.hpp"
#include "pmd/errors.hpp"
#include "pmd/normal.hpp"
#include "pmd/rng.hpp"
#include "pmd/simulation.hpp"

using pmd::AggregatedGroup;
using pmd::Coefficients;
using pmd::Matrix;

namespace {

AggregatedGroup intercept_group(int ni, int m, pmd::OutcomeVector counts) {
  AggregatedGroup g;
  g.covariates = Matrix(ni, 1, 1.0);
  g.counts = std::move(counts);
  (void)m;
  return g;
}

// synthetic groups with an intercept and one standard-normal covariate,
// counts drawn from the model itself
std::vector<AggregatedGroup> synthetic_groups(int h, int ni, const Coefficients& beta,
                                              std::uint64_t seed) {
  const int m = static_cast<int>(beta.rows()) + 1;
  std::vector<AggregatedGroup> groups;
  for (int gidx = 0; gidx < h; ++gidx) {
    AggregatedGroup g;
    g.covariates = Matrix(ni, 2, 1.0);
    for (int i = 0; i < ni; ++i)
      g.covariates(i, 1) =
          pmd::norm_quantile(pmd::Philox::u01(seed, gidx, static_cast<std::uint64_t>(i)));
    g.counts.assign(m, 0);  // placeholder so softmax_spm's validation passes
    g.counts[0] = ni;
    pmd::SPM spm = pmd::softmax_spm(beta, g);
    pmd::SampleBatch draw = pmd::sample(spm, 1, seed ^ (0x9e37u + gidx));
    for (int j = 0; j < m; ++j) g.counts[j] = draw.row(0)[j];
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace

TEST_CASE("softmax probabilities have the logistic closed forms", "[mle]") {
  SECTION("zero coefficients give uniform rows") {
    AggregatedGroup g = intercept_group(3, 3, {3, 0, 0});
    pmd::SPM spm = pmd::softmax_spm(Coefficients(2, 1, 0.0), g);
    REQUIRE(spm.n() == 3);
    REQUIRE(spm.m() == 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        CHECK_THAT(spm(i, j), Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-12));
  }

  SECTION("an intercept of log 3 splits two categories 3:1") {
    AggregatedGroup g = intercept_group(2, 2, {2, 0});
    Coefficients beta(1, 1, std::log(3.0));
    pmd::SPM spm = pmd::softmax_spm(beta, g);
    CHECK_THAT(spm(0, 0), Catch::Matchers::WithinAbs(0.75, 1e-12));
    CHECK_THAT(spm(0, 1), Catch::Matchers::WithinAbs(0.25, 1e-12));
  }

  SECTION("huge predictors saturate without overflowing") {
    AggregatedGroup g = intercept_group(1, 3, {1, 0, 0});
    Coefficients beta(2, 1, 0.0);
    beta(0, 0) = 50.0;
    pmd::SPM spm = pmd::softmax_spm(beta, g);
    CHECK(spm(0, 0) >= 1.0 - 1e-15);
    double sum = 0.0;
    for (int j = 0; j < 3; ++j) sum += spm(0, j);
    CHECK(sum == 1.0);
  }

  SECTION("coefficient shape is checked") {
    AggregatedGroup g = intercept_group(2, 3, {2, 0, 0});
    CHECK_THROWS_AS(pmd::softmax_spm(Coefficients(1, 1, 0.0), g), pmd::dimension_error);
    CHECK_THROWS_AS(pmd::softmax_spm(Coefficients(2, 2, 0.0), g), pmd::dimension_error);
  }
}

TEST_CASE("the log-likelihood matches hand-computed cases", "[mle]") {
  SECTION("one unit per group is a categorical log-probability") {
    AggregatedGroup g = intercept_group(1, 2, {1, 0});
    Coefficients beta(1, 1, std::log(3.0));
    pmd::LoglikResult ll = pmd::loglik(beta, {g});
    CHECK_THAT(ll.value, Catch::Matchers::WithinAbs(std::log(0.75), 1e-12));
    CHECK_FALSE(ll.degenerate);
  }

  SECTION("uniform three-way softmax on two units") {
    // P(counts = (1,1,0)) = 2 * (1/3)^2 = 2/9
    AggregatedGroup g = intercept_group(2, 3, {1, 1, 0});
    pmd::LoglikResult ll = pmd::loglik(Coefficients(2, 1, 0.0), {g});
    CHECK_THAT(ll.value, Catch::Matchers::WithinAbs(std::log(2.0 / 9.0), 1e-12));
  }

  SECTION("identical groups double the log-likelihood exactly") {
    AggregatedGroup g = intercept_group(4, 3, {2, 1, 1});
    Coefficients beta(2, 1, 0.3);
    double single = pmd::loglik(beta, {g}).value;
    double twice = pmd::loglik(beta, {g, g}).value;
    CHECK(twice == 2.0 * single);
  }

  SECTION("group order is irrelevant") {
    AggregatedGroup a = intercept_group(4, 3, {2, 1, 1});
    AggregatedGroup b = intercept_group(3, 3, {0, 2, 1});
    Coefficients beta(2, 1, -0.2);
    CHECK_THAT(pmd::loglik(beta, {a, b}).value,
               Catch::Matchers::WithinAbs(pmd::loglik(beta, {b, a}).value, 1e-12));
  }

  SECTION("normal-approximate likelihood is close but not identical") {
    AggregatedGroup g = intercept_group(40, 3, {15, 12, 13});
    Coefficients beta(2, 1, 0.1);
    double exact = pmd::loglik(beta, {g}, pmd::LikMethod::exact).value;
    double na = pmd::loglik(beta, {g}, pmd::LikMethod::na).value;
    CHECK_THAT(na, Catch::Matchers::WithinAbs(exact, 0.05));
    CHECK(na != exact);
  }

  SECTION("an impossible outcome floors instead of blowing up") {
    // category 1 has softmax probability ~ e^-20 per unit, so observing all
    // 100 units there sits hundreds of sigmas out and the pmf underflows
    AggregatedGroup g = intercept_group(100, 2, {100, 0});
    Coefficients beta(1, 1, -20.0);
    pmd::LoglikResult ll = pmd::loglik(beta, {g}, pmd::LikMethod::na);
    CHECK(ll.degenerate);
    CHECK(std::isfinite(ll.value));
    CHECK(ll.value <= std::log(pmd::kLikelihoodFloor) + 1e-9);
  }
}

TEST_CASE("intercept-only two-category fits recover the pooled logit", "[mle]") {
  // 6 successes out of 15 units overall: beta-hat = log(6/9)
  std::vector<AggregatedGroup> groups{intercept_group(4, 2, {2, 2}),
                                      intercept_group(5, 2, {2, 3}),
                                      intercept_group(6, 2, {2, 4})};
  pmd::FitResult fr = pmd::fit(groups);
  REQUIRE(fr.converged);
  CHECK_THAT(fr.beta_hat(0, 0), Catch::Matchers::WithinAbs(std::log(6.0 / 9.0), 1e-4));
  CHECK(fr.se_available);
  CHECK(fr.ci_lower(0, 0) < fr.beta_hat(0, 0));
  CHECK(fr.ci_upper(0, 0) > fr.beta_hat(0, 0));
}

TEST_CASE("fits recover the coefficients that generated the data", "[mle]") {
  Coefficients truth(2, 2, 0.0);
  truth(0, 0) = 0.5;
  truth(0, 1) = -0.3;
  truth(1, 0) = -0.2;
  truth(1, 1) = 0.8;
  std::vector<AggregatedGroup> groups = synthetic_groups(30, 10, truth, 1234);
  pmd::FitResult fr = pmd::fit(groups);
  REQUIRE(fr.converged);
  REQUIRE(fr.se_available);
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j) {
      INFO("coefficient (" << k << "," << j << ")");
      CHECK(std::fabs(fr.beta_hat(k, j) - truth(k, j)) < 3.0 * fr.std_errors(k, j));
      CHECK_THAT(fr.ci_lower(k, j),
                 Catch::Matchers::WithinAbs(fr.beta_hat(k, j) - 1.96 * fr.std_errors(k, j), 1e-12));
      CHECK_THAT(fr.ci_upper(k, j),
                 Catch::Matchers::WithinAbs(fr.beta_hat(k, j) + 1.96 * fr.std_errors(k, j), 1e-12));
    }

  SECTION("the optimum really is a local maximum") {
    double at_hat = fr.loglik;
    for (int k = 0; k < 2; ++k)
      for (int j = 0; j < 2; ++j) {
        Coefficients bumped = fr.beta_hat;
        bumped(k, j) += 0.05;
        CHECK(pmd::loglik(bumped, groups).value <= at_hat + 1e-9);
        bumped(k, j) -= 0.10;
        CHECK(pmd::loglik(bumped, groups).value <= at_hat + 1e-9);
      }
  }

  SECTION("a warm start converges to the same optimum") {
    pmd::FitResult warm = pmd::fit(groups, &truth);
    REQUIRE(warm.converged);
    for (int k = 0; k < 2; ++k)
      for (int j = 0; j < 2; ++j)
        CHECK_THAT(warm.beta_hat(k, j),
                   Catch::Matchers::WithinAbs(fr.beta_hat(k, j), 1e-3));
  }
}

TEST_CASE("degenerate data does not crash the optimizer", "[mle]") {
  // every observation in the baseline category: the MLE runs off to -infinity
  std::vector<AggregatedGroup> groups{intercept_group(3, 2, {0, 3}),
                                      intercept_group(4, 2, {0, 4})};
  pmd::FitResult fr;
  REQUIRE_NOTHROW(fr = pmd::fit(groups));
  CHECK(fr.iterations <= 500);
  CHECK(fr.beta_hat(0, 0) < -1.0);  // pushed hard toward the boundary
  CHECK(fr.loglik <= 0.0);
}

TEST_CASE("fit inputs are validated", "[mle]") {
  CHECK_THROWS_AS(pmd::fit({}), pmd::dimension_error);

  std::vector<AggregatedGroup> mixed{intercept_group(2, 2, {1, 1}),
                                     intercept_group(2, 3, {1, 1, 0})};
  CHECK_THROWS_AS(pmd::fit(mixed), pmd::dimension_error);

  pmd::FitOptions tight;
  tight.max_params = 0;
  std::vector<AggregatedGroup> ok{intercept_group(2, 2, {1, 1})};
  CHECK_THROWS_AS(pmd::fit(ok, nullptr, tight), pmd::validation_error);

  AggregatedGroup bad = intercept_group(2, 2, {1, 2});  // counts sum to 3, not 2
  CHECK_THROWS_AS(pmd::validate_group(bad), pmd::validation_error);
}

TEST_CASE("prediction needs a converged fit and reproduces the model", "[mle]") {
  std::vector<AggregatedGroup> groups{intercept_group(4, 3, {2, 1, 1}),
                                      intercept_group(4, 3, {1, 2, 1})};
  pmd::FitResult fr = pmd::fit(groups);
  REQUIRE(fr.converged);
  pmd::PredictResult pr = pmd::predict_spm(fr, groups[0]);
  CHECK(pr.spm.n() == 4);
  CHECK(pr.spm.m() == 3);
  CHECK(pr.prob > 0.0);
  CHECK(pr.prob <= 1.0);

  pmd::FitResult broken = fr;
  broken.converged = false;
  CHECK_THROWS_AS(pmd::predict_spm(broken, groups[0]), pmd::validation_error);
}

TEST_CASE("unit-level files aggregate into groups", "[mle]") {
  std::string path = "/tmp/pmd_test_mle_raw.csv";
  {
    std::ofstream f(path);
    // group_id, covariate, category
    f << "2,0.5,1\n2,-0.5,2\n1,1.0,1\n1,2.0,1\n1,0.0,3\n";
  }
  std::vector<AggregatedGroup> groups = pmd::load_groups_raw(path);
  REQUIRE(groups.size() == 2);
  // groups come back ordered by id: group 1 first
  CHECK(groups[0].covariates.rows() == 3);
  CHECK(groups[0].covariates.cols() == 2);  // intercept prepended
  CHECK(groups[0].covariates(0, 0) == 1.0);
  CHECK(groups[0].covariates(1, 1) == 2.0);
  CHECK(groups[0].counts == pmd::OutcomeVector{2, 0, 1});
  CHECK(groups[1].counts == pmd::OutcomeVector{1, 1, 0});

  {
    std::ofstream f(path);
    f << "1,0.5,0\n";  // category must be >= 1
  }
  CHECK_THROWS_AS(pmd::load_groups_raw(path), pmd::validation_error);
  std::remove(path.c_str());
}

TEST_CASE("pre-aggregated file pairs load and join on group id", "[mle]") {
  std::string cov_path = "/tmp/pmd_test_mle_cov.csv";
  std::string cnt_path = "/tmp/pmd_test_mle_cnt.csv";
  {
    std::ofstream f(cov_path);
    f << "1,0.2\n1,0.4\n2,-0.1\n2,0.3\n2,0.0\n";
  }
  {
    std::ofstream f(cnt_path);
    f << "1,2,0\n2,1,2\n";
  }
  std::vector<AggregatedGroup> groups = pmd::load_groups_aggregated(cov_path, cnt_path);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].covariates.rows() == 2);
  CHECK(groups[0].counts == pmd::OutcomeVector{2, 0});
  CHECK(groups[1].covariates.rows() == 3);
  CHECK(groups[1].counts == pmd::OutcomeVector{1, 2});

  SECTION("duplicate count rows are rejected") {
    std::ofstream f(cnt_path);
    f << "1,2,0\n1,0,2\n2,1,2\n";
    f.close();
    CHECK_THROWS_AS(pmd::load_groups_aggregated(cov_path, cnt_path),
                    pmd::validation_error);
  }

  SECTION("mismatched group sets are rejected") {
    std::ofstream f(cnt_path);
    f << "1,2,0\n3,1,2\n";
    f.close();
    CHECK_THROWS_AS(pmd::load_groups_aggregated(cov_path, cnt_path), pmd::error);
  }

  std::remove(cov_path.c_str());
  std::remove(cnt_path.c_str());
}
