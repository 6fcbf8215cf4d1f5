#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "pmd/csv.hpp"
#include "pmd/dftcf.hpp"
#include "pmd/errors.hpp"
#include "pmd/matrix.hpp"
#include "pmd/oracle.hpp"
#include "pmd/spm.hpp"

namespace pmd {

// Per-unit classifier output: predicted-class probabilities and the known
// true label (1-based) for each unit.
struct ClassifierOutput {
  Matrix probs;                  // n x m, rows sum to 1
  std::vector<int> true_labels;  // length n, values in 1..m
};

inline void validate_classifier_output(const ClassifierOutput& out) {
  const std::size_t n = out.probs.rows();
  const int m = static_cast<int>(out.probs.cols());
  if (n < 1 || m < 2)
    throw dimension_error("classifier output needs >=1 unit and >=2 classes");
  if (out.true_labels.size() != n)
    throw dimension_error("true_labels length must match the probability rows");
  for (int lab : out.true_labels)
    if (lab < 1 || lab > m)
      throw validation_error("true label " + std::to_string(lab) +
                             " outside 1.." + std::to_string(m));
}

// CSV columns: true_label, p_1, ..., p_m
inline ClassifierOutput load_classifier_csv(const std::string& path,
                                            bool skip_header = false,
                                            double row_tol = kDefaultRowTol) {
  const Matrix table = read_csv_matrix(path, skip_header);
  if (table.cols() < 3)
    throw validation_error(path + ": expected true_label and m >= 2 probabilities");
  const int m = static_cast<int>(table.cols()) - 1;
  ClassifierOutput out;
  out.true_labels.resize(table.rows());
  Matrix probs(table.rows(), m, 0.0);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const double lab = table(r, 0);
    if (lab != std::floor(lab))
      throw validation_error(path + ": true_label must be an integer, row " +
                             std::to_string(r + 1));
    out.true_labels[r] = static_cast<int>(lab);
    for (int j = 0; j < m; ++j) probs(r, j) = table(r, 1 + j);
  }
  // reuse the row-stochastic validation/fix-up, then keep the entries
  out.probs = validate_spm(std::move(probs), row_tol).entries();
  validate_classifier_output(out);
  return out;
}

// The confusion matrix of a probabilistic classifier as one block-diagonal
// PMD: units sorted by true class; a unit with true class k gets its m
// predicted-class probabilities in columns (k-1)*m .. k*m-1 of an n x m^2
// matrix. Cell (predicted j, true k) of the confusion matrix is then
// category (k-1)*m + (j-1) of the PMD.
struct ConfusionModel {
  SPM spm;                  // n x m^2 block-diagonal
  BlockPartition partition; // one block per class, in class order (may be row-less)
  std::vector<int> class_counts;  // n_k by true class, length m
  int m = 0;
};

inline ConfusionModel build_confusion_pmd(const ClassifierOutput& out,
                                          double row_tol = kDefaultRowTol) {
  validate_classifier_output(out);
  const std::size_t n = out.probs.rows();
  const int m = static_cast<int>(out.probs.cols());

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return out.true_labels[a] < out.true_labels[b];
  });

  Matrix big(n, static_cast<std::size_t>(m) * m, 0.0);
  std::vector<int> counts(m, 0);
  BlockPartition part;
  part.blocks.resize(m);
  for (int k = 0; k < m; ++k)
    for (int j = 0; j < m; ++j)
      part.blocks[k].cols.push_back(static_cast<std::size_t>(k) * m + j);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t unit = order[r];
    const int k = out.true_labels[unit] - 1;
    ++counts[k];
    part.blocks[k].rows.push_back(r);
    for (int j = 0; j < m; ++j)
      big(r, static_cast<std::size_t>(k) * m + j) = out.probs(unit, j);
  }

  return ConfusionModel{validate_spm(std::move(big), row_tol), std::move(part),
                        std::move(counts), m};
}

// Probability of observing exactly the confusion matrix x, where x(j-1,k-1)
// counts units of true class k predicted as j. Each column must sum to the
// class size n_k. Factorizes over the per-class blocks, so the m^2-category
// grid is never materialized.
inline double joint_pmf(const ConfusionModel& model, const Matrix& x,
                        unsigned threads = 1,
                        std::uint64_t mem_cap_cells = kDefaultMemCapCells) {
  const int m = model.m;
  if (static_cast<int>(x.rows()) != m || static_cast<int>(x.cols()) != m)
    throw dimension_error("confusion count matrix must be m x m");
  OutcomeVector full(static_cast<std::size_t>(m) * m, 0);
  for (int k = 0; k < m; ++k) {
    long col_sum = 0;
    for (int j = 0; j < m; ++j) {
      const double val = x(j, k);
      if (val < 0 || val != std::floor(val))
        throw validation_error("confusion counts must be nonnegative integers");
      full[static_cast<std::size_t>(k) * m + j] = static_cast<int>(val);
      col_sum += static_cast<long>(val);
    }
    if (col_sum != model.class_counts[k])
      throw support_error("column " + std::to_string(k + 1) + " sums to " +
                          std::to_string(col_sum) + " but class has " +
                          std::to_string(model.class_counts[k]) + " units");
  }
  return pmf_blockwise(model.spm, model.partition, full, threads, mem_cap_cells);
}

// Marginal pmf of one confusion-matrix cell (predicted j, true k), 1-based:
// a sum of n_k independent Bernoullis, so a Poisson binomial on 0..n_k.
inline std::vector<double> cell_marginal_pmf(const ConfusionModel& model, int predicted,
                                             int true_class) {
  const int m = model.m;
  if (predicted < 1 || predicted > m || true_class < 1 || true_class > m)
    throw dimension_error("cell indices must lie in 1..m");
  const auto& block = model.partition.blocks[true_class - 1];
  if (block.rows.empty())
    throw validation_error("class " + std::to_string(true_class) +
                           " has no units; its cell marginals are undefined");
  std::vector<double> bern;
  bern.reserve(block.rows.size());
  const std::size_t col =
      static_cast<std::size_t>(true_class - 1) * m + (predicted - 1);
  for (std::size_t r : block.rows) bern.push_back(model.spm(r, col));
  return poisson_binomial_pmf(bern);
}

struct CellInterval {
  int predicted = 0;   // 1-based
  int true_class = 0;  // 1-based
  double mean = 0.0;
  int lo = 0, hi = 0;  // central credible interval on the count
  double level = 0.0;
};

// Central interval at the given level: lo is the smallest count with
// cdf >= (1-level)/2, hi the smallest with cdf >= (1+level)/2.
inline CellInterval cell_interval(const ConfusionModel& model, int predicted,
                                  int true_class, double level = 0.95) {
  if (!(level > 0.0 && level < 1.0))
    throw validation_error("interval level must lie in (0,1)");
  const std::vector<double> pmf = cell_marginal_pmf(model, predicted, true_class);
  CellInterval out;
  out.predicted = predicted;
  out.true_class = true_class;
  out.level = level;
  const int top = static_cast<int>(pmf.size()) - 1;
  double mean = 0.0;
  for (int c = 0; c <= top; ++c) mean += c * pmf[c];
  out.mean = mean;
  const double lo_target = (1.0 - level) / 2.0;
  const double hi_target = (1.0 + level) / 2.0;
  double cdf = 0.0;
  int lo = top, hi = top;
  bool lo_set = false, hi_set = false;
  for (int c = 0; c <= top; ++c) {
    cdf += pmf[c];
    if (!lo_set && cdf >= lo_target) {
      lo = c;
      lo_set = true;
    }
    if (!hi_set && cdf >= hi_target) {
      hi = c;
      hi_set = true;
      break;
    }
  }
  out.lo = lo;
  out.hi = hi;
  return out;
}

}  // namespace pmd
