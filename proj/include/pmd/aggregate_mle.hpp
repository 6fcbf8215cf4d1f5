#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pmd/csv.hpp"
#include "pmd/dftcf.hpp"
#include "pmd/errors.hpp"
#include "pmd/matrix.hpp"
#include "pmd/normal_approx.hpp"
#include "pmd/spm.hpp"
#include "pmd/threading.hpp"

namespace pmd {

// One group of aggregated categorical data: per-unit covariate rows (first
// column all ones) and the group's total counts per category.
struct AggregatedGroup {
  Matrix covariates;     // n_i x (v+1)
  OutcomeVector counts;  // length m, sums to n_i
};

// regression coefficients, one row per non-baseline category
using Coefficients = Matrix;  // (m-1) x (v+1)

inline void validate_group(const AggregatedGroup& g) {
  if (g.covariates.rows() < 1 || g.covariates.cols() < 1)
    throw dimension_error("group needs at least one unit and one covariate column");
  if (g.counts.size() < 2) throw dimension_error("group needs at least 2 categories");
  for (std::size_t i = 0; i < g.covariates.rows(); ++i)
    for (std::size_t j = 0; j < g.covariates.cols(); ++j)
      if (!std::isfinite(g.covariates(i, j)))
        throw validation_error("non-finite covariate value");
  long total = 0;
  for (int c : g.counts) {
    if (c < 0) throw validation_error("negative count");
    total += c;
  }
  if (total != static_cast<long>(g.covariates.rows()))
    throw validation_error("group counts sum to " + std::to_string(total) +
                           " but the group has " + std::to_string(g.covariates.rows()) +
                           " units");
}

// Per-unit softmax probabilities with the last category as baseline:
// p_k = exp(g.beta_k) / (1 + sum_k exp(g.beta_k)). Max-subtraction keeps the
// exponentials finite for any predictor magnitude.
inline SPM softmax_spm(const Coefficients& beta, const AggregatedGroup& group) {
  validate_group(group);
  const int mm1 = static_cast<int>(beta.rows());
  const int vp1 = static_cast<int>(beta.cols());
  if (mm1 + 1 != static_cast<int>(group.counts.size()))
    throw dimension_error("coefficient rows must be m-1");
  if (vp1 != static_cast<int>(group.covariates.cols()))
    throw dimension_error("coefficient columns must match covariate columns");
  const int ni = static_cast<int>(group.covariates.rows());
  Matrix raw(ni, mm1 + 1, 0.0);
  std::vector<double> eta(mm1);
  for (int i = 0; i < ni; ++i) {
    double peak = 0.0;  // baseline predictor is 0
    for (int k = 0; k < mm1; ++k) {
      double e = 0.0;
      for (int j = 0; j < vp1; ++j) e += group.covariates(i, j) * beta(k, j);
      if (!std::isfinite(e)) throw validation_error("non-finite linear predictor");
      eta[k] = e;
      peak = std::max(peak, e);
    }
    double denom = std::exp(-peak);
    for (int k = 0; k < mm1; ++k) denom += std::exp(eta[k] - peak);
    for (int k = 0; k < mm1; ++k) raw(i, k) = std::exp(eta[k] - peak) / denom;
    raw(i, mm1) = std::exp(-peak) / denom;
  }
  return validate_spm(std::move(raw), 1e-9);
}

enum class LikMethod { exact, na };

constexpr double kLikelihoodFloor = 1e-300;

struct LoglikResult {
  double value = 0.0;
  bool degenerate = false;  // some group's pmf hit the likelihood floor
};

// Aggregated-data log-likelihood: sum over groups of log PMD-pmf of the
// observed counts under the group's softmax SPM.
inline LoglikResult loglik(const Coefficients& beta,
                           const std::vector<AggregatedGroup>& groups,
                           LikMethod method = LikMethod::exact, unsigned threads = 1,
                           std::uint64_t mem_cap_cells = kDefaultMemCapCells) {
  if (groups.empty()) throw dimension_error("loglik needs at least one group");
  std::vector<double> probs(groups.size());
  parallel_for(groups.size(), threads, [&](std::size_t i) {
    const SPM spm = softmax_spm(beta, groups[i]);
    probs[i] = method == LikMethod::exact
                   ? pmf_at(spm, groups[i].counts, 1, mem_cap_cells)
                   : na_pmf_at(spm, groups[i].counts);
  });
  LoglikResult out;
  for (double p : probs) {
    if (!(p >= kLikelihoodFloor)) {
      out.degenerate = true;
      p = kLikelihoodFloor;
    }
    out.value += std::log(p);
  }
  return out;
}

struct FitOptions {
  int max_iterations = 500;
  double grad_tol = 1e-5;     // max-norm of the gradient at convergence
  double rel_tol = 1e-10;     // relative log-likelihood change at convergence
  double fd_step = 1e-5;      // central-difference step, scaled by max(1,|beta|)
  double hess_step = 5e-4;    // step for the standard-error Hessian
  int max_params = 200;
  LikMethod method = LikMethod::exact;
  unsigned threads = 1;
  std::uint64_t mem_cap_cells = kDefaultMemCapCells;
};

struct FitResult {
  Coefficients beta_hat;
  Matrix std_errors, ci_lower, ci_upper;  // (m-1) x (v+1); valid iff se_available
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  bool se_available = false;
  bool degenerate = false;  // likelihood floor was hit somewhere along the way
};

namespace detail {

struct MleProblem {
  const std::vector<AggregatedGroup>* groups;
  int mm1, vp1;
  FitOptions opt;
  mutable bool degenerate = false;

  // negative log-likelihood of the flattened coefficient vector
  double operator()(const Eigen::VectorXd& theta) const {
    Coefficients beta(mm1, vp1, 0.0);
    for (int k = 0; k < mm1; ++k)
      for (int j = 0; j < vp1; ++j) beta(k, j) = theta(k * vp1 + j);
    LoglikResult ll = loglik(beta, *groups, opt.method, opt.threads, opt.mem_cap_cells);
    if (ll.degenerate) degenerate = true;
    return -ll.value;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& theta, double step_scale) const {
    const int p = static_cast<int>(theta.size());
    Eigen::VectorXd g(p);
    Eigen::VectorXd probe = theta;
    for (int k = 0; k < p; ++k) {
      const double h = step_scale * std::max(1.0, std::fabs(theta(k)));
      probe(k) = theta(k) + h;
      const double up = (*this)(probe);
      probe(k) = theta(k) - h;
      const double down = (*this)(probe);
      probe(k) = theta(k);
      g(k) = (up - down) / (2.0 * h);
    }
    return g;
  }
};

}  // namespace detail

// Maximum-likelihood fit by BFGS ascent with numerical gradients. Returns the
// best point found even when the iteration budget runs out (converged=false).
inline FitResult fit(const std::vector<AggregatedGroup>& groups,
                     const Coefficients* init = nullptr, const FitOptions& opt = {}) {
  if (groups.empty()) throw dimension_error("fit needs at least one group");
  const int m = static_cast<int>(groups[0].counts.size());
  const int vp1 = static_cast<int>(groups[0].covariates.cols());
  for (const auto& g : groups) {
    validate_group(g);
    if (static_cast<int>(g.counts.size()) != m ||
        static_cast<int>(g.covariates.cols()) != vp1)
      throw dimension_error("groups disagree on category or covariate count");
  }
  const int mm1 = m - 1;
  const int nparam = mm1 * vp1;
  if (nparam > opt.max_params)
    throw validation_error("parameter count " + std::to_string(nparam) +
                           " exceeds the configured maximum " +
                           std::to_string(opt.max_params));

  detail::MleProblem prob{&groups, mm1, vp1, opt};

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(nparam);
  if (init) {
    if (static_cast<int>(init->rows()) != mm1 || static_cast<int>(init->cols()) != vp1)
      throw dimension_error("initial coefficients have the wrong shape");
    for (int k = 0; k < mm1; ++k)
      for (int j = 0; j < vp1; ++j) theta(k * vp1 + j) = (*init)(k, j);
  }

  double f = prob(theta);
  Eigen::VectorXd g = prob.gradient(theta, opt.fd_step);
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(nparam, nparam);

  FitResult result;
  bool converged = false;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    if (g.cwiseAbs().maxCoeff() < opt.grad_tol) {
      converged = true;
      break;
    }
    Eigen::VectorXd dir = -(hinv * g);
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {  // lost positive-definiteness: restart from steepest descent
      hinv.setIdentity();
      dir = -g;
      slope = g.dot(dir);
    }
    // Armijo backtracking
    double t = 1.0;
    double fnew = 0.0;
    Eigen::VectorXd theta_new;
    bool stepped = false;
    while (t > 1e-14) {
      theta_new = theta + t * dir;
      fnew = prob(theta_new);
      if (fnew <= f + 1e-4 * t * slope) {
        stepped = true;
        break;
      }
      t *= 0.5;
    }
    if (!stepped) break;  // flat to machine precision along the search line

    Eigen::VectorXd gnew = prob.gradient(theta_new, opt.fd_step);
    const Eigen::VectorXd s = theta_new - theta;
    const Eigen::VectorXd y = gnew - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(nparam, nparam);
      hinv = (ident - rho * s * y.transpose()) * hinv *
                 (ident - rho * y * s.transpose()) +
             rho * s * s.transpose();
    }
    const bool tiny_change = std::fabs(f - fnew) <= opt.rel_tol * (1.0 + std::fabs(fnew));
    theta = theta_new;
    f = fnew;
    g = gnew;
    if (tiny_change) {
      ++it;
      converged = true;
      break;
    }
  }

  result.converged = converged;
  result.iterations = it;
  result.loglik = -f;
  result.degenerate = prob.degenerate;
  result.beta_hat = Coefficients(mm1, vp1, 0.0);
  for (int k = 0; k < mm1; ++k)
    for (int j = 0; j < vp1; ++j) result.beta_hat(k, j) = theta(k * vp1 + j);

  // observed information: central-difference Hessian of the negative
  // log-likelihood, inverted for the coefficient covariance
  Eigen::MatrixXd hess(nparam, nparam);
  std::vector<double> steps(nparam);
  for (int k = 0; k < nparam; ++k)
    steps[k] = opt.hess_step * std::max(1.0, std::fabs(theta(k)));
  Eigen::VectorXd probe = theta;
  for (int k = 0; k < nparam; ++k) {
    probe(k) = theta(k) + steps[k];
    const double up = prob(probe);
    probe(k) = theta(k) - steps[k];
    const double down = prob(probe);
    probe(k) = theta(k);
    hess(k, k) = (up - 2.0 * f + down) / (steps[k] * steps[k]);
  }
  for (int k = 0; k < nparam; ++k) {
    for (int l = k + 1; l < nparam; ++l) {
      probe(k) = theta(k) + steps[k];
      probe(l) = theta(l) + steps[l];
      const double pp = prob(probe);
      probe(l) = theta(l) - steps[l];
      const double pm = prob(probe);
      probe(k) = theta(k) - steps[k];
      const double mm = prob(probe);
      probe(l) = theta(l) + steps[l];
      const double mp = prob(probe);
      probe(k) = theta(k);
      probe(l) = theta(l);
      hess(k, l) = hess(l, k) = (pp - pm - mp + mm) / (4.0 * steps[k] * steps[l]);
    }
  }

  result.std_errors = Matrix(mm1, vp1, 0.0);
  result.ci_lower = Matrix(mm1, vp1, 0.0);
  result.ci_upper = Matrix(mm1, vp1, 0.0);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(nparam, nparam));
    bool ok = true;
    for (int k = 0; k < nparam && ok; ++k)
      if (!(cov(k, k) > 0.0) || !std::isfinite(cov(k, k))) ok = false;
    if (ok) {
      result.se_available = true;
      for (int k = 0; k < mm1; ++k)
        for (int j = 0; j < vp1; ++j) {
          const double se = std::sqrt(cov(k * vp1 + j, k * vp1 + j));
          result.std_errors(k, j) = se;
          result.ci_lower(k, j) = result.beta_hat(k, j) - 1.96 * se;
          result.ci_upper(k, j) = result.beta_hat(k, j) + 1.96 * se;
        }
    }
  }
  return result;
}

struct PredictResult {
  SPM spm;
  double prob;  // pmf value at the group's observed counts
};

inline PredictResult predict_spm(const FitResult& fitted, const AggregatedGroup& group,
                                 unsigned threads = 1,
                                 std::uint64_t mem_cap_cells = kDefaultMemCapCells) {
  if (!fitted.converged)
    throw validation_error("prediction requires a converged fit");
  SPM spm = softmax_spm(fitted.beta_hat, group);
  const double p = pmf_at(spm, group.counts, threads, mem_cap_cells);
  return PredictResult{std::move(spm), p};
}

// --- group-file ingestion ----------------------------------------------

// Raw unit-level file: columns group_id, covariate_1..covariate_v, category
// (1-based). Units aggregate into per-group covariate matrices (an intercept
// column is prepended) and count vectors; groups are ordered by id.
inline std::vector<AggregatedGroup> load_groups_raw(const std::string& path,
                                                    bool skip_header = false) {
  const Matrix table = read_csv_matrix(path, skip_header);
  if (table.cols() < 2)
    throw validation_error(path + ": expected group_id, covariates, category");
  const int v = static_cast<int>(table.cols()) - 2;
  int m = 0;
  std::map<long, std::vector<std::size_t>> by_group;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const double cat = table(r, table.cols() - 1);
    if (cat < 1 || cat != std::floor(cat))
      throw validation_error(path + ": category must be a positive integer, row " +
                             std::to_string(r + 1));
    m = std::max(m, static_cast<int>(cat));
    const double id = table(r, 0);
    if (id != std::floor(id))
      throw validation_error(path + ": group_id must be an integer, row " +
                             std::to_string(r + 1));
    by_group[static_cast<long>(id)].push_back(r);
  }
  if (m < 2) throw validation_error(path + ": needs at least 2 categories");
  std::vector<AggregatedGroup> groups;
  groups.reserve(by_group.size());
  for (const auto& [id, rows] : by_group) {
    AggregatedGroup g;
    g.covariates = Matrix(rows.size(), v + 1, 1.0);
    g.counts.assign(m, 0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (int j = 0; j < v; ++j) g.covariates(i, j + 1) = table(rows[i], 1 + j);
      ++g.counts[static_cast<int>(table(rows[i], table.cols() - 1)) - 1];
    }
    validate_group(g);
    groups.push_back(std::move(g));
  }
  return groups;
}

// Pre-aggregated pair: a unit-level covariates file (group_id, cov_1..cov_v)
// and a per-group counts file (group_id, c_1..c_m).
inline std::vector<AggregatedGroup> load_groups_aggregated(
    const std::string& covariates_path, const std::string& counts_path,
    bool skip_header = false) {
  const Matrix cov = read_csv_matrix(covariates_path, skip_header);
  const Matrix cnt = read_csv_matrix(counts_path, skip_header);
  if (cov.cols() < 1) throw validation_error(covariates_path + ": empty table");
  if (cnt.cols() < 3)
    throw validation_error(counts_path + ": expected group_id and m >= 2 counts");
  const int v = static_cast<int>(cov.cols()) - 1;
  const int m = static_cast<int>(cnt.cols()) - 1;

  std::map<long, std::vector<std::size_t>> units;
  for (std::size_t r = 0; r < cov.rows(); ++r) {
    const double id = cov(r, 0);
    if (id != std::floor(id))
      throw validation_error(covariates_path + ": group_id must be an integer");
    units[static_cast<long>(id)].push_back(r);
  }
  std::map<long, OutcomeVector> counts;
  for (std::size_t r = 0; r < cnt.rows(); ++r) {
    const double id = cnt(r, 0);
    if (id != std::floor(id))
      throw validation_error(counts_path + ": group_id must be an integer");
    OutcomeVector c(m);
    for (int j = 0; j < m; ++j) {
      const double val = cnt(r, 1 + j);
      if (val < 0 || val != std::floor(val))
        throw validation_error(counts_path + ": counts must be nonnegative integers");
      c[j] = static_cast<int>(val);
    }
    if (!counts.emplace(static_cast<long>(id), std::move(c)).second)
      throw validation_error(counts_path + ": duplicate group_id " +
                             std::to_string(static_cast<long>(id)));
  }
  if (units.size() != counts.size())
    throw validation_error("covariates and counts files disagree on the group set");

  std::vector<AggregatedGroup> groups;
  groups.reserve(units.size());
  for (const auto& [id, rows] : units) {
    auto it = counts.find(id);
    if (it == counts.end())
      throw validation_error("group " + std::to_string(id) + " missing from " +
                             counts_path);
    AggregatedGroup g;
    g.covariates = Matrix(rows.size(), v + 1, 1.0);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (int j = 0; j < v; ++j) g.covariates(i, j + 1) = cov(rows[i], 1 + j);
    g.counts = it->second;
    validate_group(g);
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace pmd
