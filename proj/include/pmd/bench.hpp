#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "pmd/dftcf.hpp"
#include "pmd/errors.hpp"
#include "pmd/format.hpp"
#include "pmd/matrix.hpp"
#include "pmd/mvn.hpp"
#include "pmd/normal_approx.hpp"
#include "pmd/oracle.hpp"
#include "pmd/rng.hpp"
#include "pmd/simulation.hpp"
#include "pmd/spm.hpp"
#include "pmd/threading.hpp"
#include "pmd/voting.hpp"

namespace pmd {

// Random row-stochastic matrix with rows ~ symmetric Dirichlet(1,...,1),
// drawn as normalized exponentials. Deterministic per (n, m, seed).
inline SPM random_spm(int n, int m, std::uint64_t seed) {
  if (n < 1 || m < 2) throw dimension_error("random_spm needs n >= 1, m >= 2");
  Matrix raw(static_cast<std::size_t>(n), static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int j = 0; j < m; ++j) {
      const double u = Philox::u01(seed, static_cast<std::uint64_t>(i),
                                   static_cast<std::uint64_t>(j));
      const double e = -std::log1p(-u);
      raw(i, j) = e;
      sum += e;
    }
    if (sum <= 0.0) {
      for (int j = 0; j < m; ++j) raw(i, j) = 1.0 / m;
    } else {
      for (int j = 0; j < m; ++j) raw(i, j) /= sum;
    }
  }
  return validate_spm(std::move(raw));
}

enum class Study { binomial, poisson_binomial, enumeration, na_vs_exact, sim_vs_exact };

inline const char* study_name(Study s) {
  switch (s) {
    case Study::binomial: return "binomial";
    case Study::poisson_binomial: return "poisson-binomial";
    case Study::enumeration: return "enumeration";
    case Study::na_vs_exact: return "na-vs-exact";
    case Study::sim_vs_exact: return "sim-vs-exact";
  }
  return "?";
}

inline Study parse_study(const std::string& name) {
  if (name == "binomial") return Study::binomial;
  if (name == "poisson-binomial") return Study::poisson_binomial;
  if (name == "enumeration") return Study::enumeration;
  if (name == "na-vs-exact") return Study::na_vs_exact;
  if (name == "sim-vs-exact") return Study::sim_vs_exact;
  throw validation_error("unknown study '" + name + "'");
}

struct StudyConfig {
  Study study = Study::binomial;
  std::vector<int> n_values;
  int m = 2;
  int replicates = 50;
  std::uint64_t seed = 1;
  std::int64_t b = 1000000;  // simulation batch size (sim-vs-exact only)
  unsigned threads = 1;
  std::uint64_t mem_cap_cells = kDefaultMemCapCells;
};

struct StudyRow {
  std::string study;
  int n = 0;
  int m = 0;
  std::string metric;
  double value = 0.0;
};

namespace detail {

inline std::uint64_t replicate_seed(std::uint64_t base, int n, int rep) {
  return Philox::mix64(base, static_cast<std::uint64_t>(n),
                       static_cast<std::uint64_t>(rep));
}

// closed-form Binomial(n,p) pmf via log-gamma, an independent route from
// both the transform and the convolution oracle
inline std::vector<double> binomial_pmf(int n, double p) {
  std::vector<double> out(n + 1);
  const double lp = std::log(p), lq = std::log1p(-p);
  for (int x = 0; x <= n; ++x) {
    const double lc = std::lgamma(n + 1.0) - std::lgamma(x + 1.0) -
                      std::lgamma(n - x + 1.0);
    out[x] = std::exp(lc + x * lp + (n - x) * lq);
  }
  return out;
}

struct ErrPair {
  double mae = 0.0, tae = 0.0, baseline = 0.0;
};

// full-support normal-approximation error against an exact pmf
inline ErrPair na_errors(const SPM& spm, const PmfArray& exact, double na_tol) {
  const Moments mo = moments(spm);
  ErrPair e;
  exact.for_each_support([&](const OutcomeVector& x, double truth) {
    std::vector<double> center(spm.m() - 1);
    for (int j = 0; j + 1 < spm.m(); ++j) center[j] = x[j];
    const double approx =
        mvn_rect_prob(mo.mu_star, mo.sigma_star, Rectangle::centered(center, 0.5),
                      kNaSeed, na_tol)
            .prob;
    e.mae = std::max(e.mae, std::fabs(approx - truth));
    e.baseline = std::max(e.baseline, truth);
  });
  return e;
}

}  // namespace detail

// Accuracy studies: per-n error summaries of each pmf route against the
// exact transform (or of the transform against an independent oracle).
inline std::vector<StudyRow> accuracy_study(const StudyConfig& cfg) {
  if (cfg.n_values.empty()) throw validation_error("study needs at least one n");
  if (cfg.replicates < 1) throw validation_error("study needs replicates >= 1");
  const int reps = cfg.replicates;
  std::vector<StudyRow> rows;
  const std::string name = study_name(cfg.study);

  for (int n : cfg.n_values) {
    switch (cfg.study) {
      case Study::binomial: {
        // identical rows (p, 1-p): the PMD collapses to Binomial(n, p)
        std::vector<detail::ErrPair> errs(reps);
        parallel_for(static_cast<std::size_t>(reps), cfg.threads, [&](std::size_t r) {
          const std::uint64_t s = detail::replicate_seed(cfg.seed, n, static_cast<int>(r));
          const double p = Philox::u01(s, 0, 0);
          Matrix raw(static_cast<std::size_t>(n), 2, 0.0);
          for (int i = 0; i < n; ++i) {
            raw(i, 0) = p;
            raw(i, 1) = 1.0 - p;
          }
          const SPM spm = validate_spm(std::move(raw));
          const PmfArray pmf = pmf_full(spm, 1, cfg.mem_cap_cells);
          const std::vector<double> ref = detail::binomial_pmf(n, spm(0, 0));
          detail::ErrPair e;
          for (int x = 0; x <= n; ++x) {
            const double d = std::fabs(pmf.data()[x] - ref[x]);
            e.mae = std::max(e.mae, d);
            e.tae += d;
            e.baseline = std::max(e.baseline, ref[x]);
          }
          errs[r] = e;
        });
        double mae = 0.0, tae = 0.0, base = 0.0;
        for (const auto& e : errs) {
          mae += e.mae;
          tae += e.tae;
          base += e.baseline;
        }
        rows.push_back({name, n, 2, "mae", mae / reps});
        rows.push_back({name, n, 2, "tae", tae / reps});
        rows.push_back({name, n, 2, "baseline", base / reps});
        break;
      }
      case Study::poisson_binomial: {
        std::vector<detail::ErrPair> errs(reps);
        parallel_for(static_cast<std::size_t>(reps), cfg.threads, [&](std::size_t r) {
          const std::uint64_t s = detail::replicate_seed(cfg.seed, n, static_cast<int>(r));
          const SPM spm = random_spm(n, 2, s);
          const PmfArray pmf = pmf_full(spm, 1, cfg.mem_cap_cells);
          std::vector<double> probs(n);
          for (int i = 0; i < n; ++i) probs[i] = spm(i, 0);
          const std::vector<double> ref = poisson_binomial_pmf(probs);
          detail::ErrPair e;
          for (int x = 0; x <= n; ++x) {
            const double d = std::fabs(pmf.data()[x] - ref[x]);
            e.mae = std::max(e.mae, d);
            e.tae += d;
            e.baseline = std::max(e.baseline, ref[x]);
          }
          errs[r] = e;
        });
        double mae = 0.0, tae = 0.0, base = 0.0;
        for (const auto& e : errs) {
          mae += e.mae;
          tae += e.tae;
          base += e.baseline;
        }
        rows.push_back({name, n, 2, "mae", mae / reps});
        rows.push_back({name, n, 2, "tae", tae / reps});
        rows.push_back({name, n, 2, "baseline", base / reps});
        break;
      }
      case Study::enumeration: {
        std::vector<double> worst(reps, 0.0);
        parallel_for(static_cast<std::size_t>(reps), cfg.threads, [&](std::size_t r) {
          const std::uint64_t s = detail::replicate_seed(cfg.seed, n, static_cast<int>(r));
          const SPM spm = random_spm(n, cfg.m, s);
          const PmfArray fast = pmf_full(spm, 1, cfg.mem_cap_cells);
          const PmfArray slow = enumerate_pmf(spm);
          double w = 0.0;
          fast.for_each_support([&](const OutcomeVector& x, double v) {
            w = std::max(w, std::fabs(v - slow.prob(x)));
          });
          worst[r] = w;
        });
        double w = 0.0;
        for (double v : worst) w = std::max(w, v);
        rows.push_back({name, n, cfg.m, "max_abs_diff", w});
        break;
      }
      case Study::na_vs_exact: {
        std::vector<detail::ErrPair> errs(reps);
        parallel_for(static_cast<std::size_t>(reps), cfg.threads, [&](std::size_t r) {
          const std::uint64_t s = detail::replicate_seed(cfg.seed, n, static_cast<int>(r));
          const SPM spm = random_spm(n, cfg.m, s);
          const PmfArray exact = pmf_full(spm, 1, cfg.mem_cap_cells);
          errs[r] = detail::na_errors(spm, exact, kNaTol);
        });
        std::vector<double> maes(reps);
        double mae_sum = 0.0, base = 0.0;
        for (int r = 0; r < reps; ++r) {
          maes[r] = errs[r].mae;
          mae_sum += errs[r].mae;
          base += errs[r].baseline;
        }
        std::sort(maes.begin(), maes.end());
        const double median = reps % 2 ? maes[reps / 2]
                                       : 0.5 * (maes[reps / 2 - 1] + maes[reps / 2]);
        rows.push_back({name, n, cfg.m, "mae_mean", mae_sum / reps});
        rows.push_back({name, n, cfg.m, "mae_median", median});
        rows.push_back({name, n, cfg.m, "baseline", base / reps});
        break;
      }
      case Study::sim_vs_exact: {
        std::vector<double> aes(reps);
        parallel_for(static_cast<std::size_t>(reps), cfg.threads, [&](std::size_t r) {
          const std::uint64_t s = detail::replicate_seed(cfg.seed, n, static_cast<int>(r));
          const SPM spm = random_spm(n, cfg.m, s);
          const PmfArray exact = pmf_full(spm, 1, cfg.mem_cap_cells);
          const ModeResult md = mode_from_pmf(exact);
          const SimEstimate est = sim_pmf_at(spm, md.x, cfg.b, s ^ 0x5eedull, 1);
          aes[r] = std::fabs(est.prob - md.p);
        });
        double ae = 0.0;
        for (double v : aes) ae += v;
        rows.push_back({name, n, cfg.m, "ae_mean", ae / reps});
        rows.push_back(
            {name, n, cfg.m, "bound", sim_error_bounds(cfg.b, 2).single_point});
        break;
      }
    }
  }
  return rows;
}

struct TimingConfig {
  std::vector<int> n_values;
  std::vector<int> m_values;
  int replicates = 3;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::uint64_t mem_cap_cells = kDefaultMemCapCells;
};

// Wall-clock cost of the full exact pmf over an (n, m) grid. Seconds are
// machine-dependent; infeasible cells are recorded, not fatal.
inline std::vector<StudyRow> timing_study(const TimingConfig& cfg) {
  if (cfg.n_values.empty() || cfg.m_values.empty())
    throw validation_error("timing study needs n and m values");
  std::vector<StudyRow> rows;
  for (int m : cfg.m_values) {
    for (int n : cfg.n_values) {
      const std::uint64_t cells = dense_grid_cells(n, m);
      if (cells >= cfg.mem_cap_cells) {  // same strict rule as the transform
        rows.push_back({"timing", n, m, "infeasible", static_cast<double>(cells)});
        continue;
      }
      double total = 0.0;
      for (int r = 0; r < cfg.replicates; ++r) {
        const SPM spm = random_spm(n, m, detail::replicate_seed(cfg.seed, n, r));
        const auto t0 = std::chrono::steady_clock::now();
        const PmfArray pmf = pmf_full(spm, cfg.threads, cfg.mem_cap_cells);
        const auto t1 = std::chrono::steady_clock::now();
        total += std::chrono::duration<double>(t1 - t0).count();
        (void)pmf;
      }
      rows.push_back({"timing", n, m, "seconds", total / cfg.replicates});
    }
  }
  return rows;
}

inline void save_study_csv(const std::vector<StudyRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw validation_error("cannot open " + path + " for writing");
  out << "study,n,m,metric,value\n";
  for (const auto& r : rows)
    out << r.study << ',' << r.n << ',' << r.m << ',' << r.metric << ','
        << fmt_full(r.value) << '\n';
  if (!out) throw validation_error("failed writing " + path);
}

// fixed-width human-readable table, 4-decimal values
inline std::string study_table(const std::vector<StudyRow>& rows) {
  std::string s;
  char line[160];
  std::snprintf(line, sizeof line, "%-18s %6s %3s %-14s %12s\n", "study", "n", "m",
                "metric", "value");
  s += line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-18s %6d %3d %-14s %12s\n", r.study.c_str(),
                  r.n, r.m, r.metric.c_str(), fmt_human(r.value).c_str());
    s += line;
  }
  return s;
}

}  // namespace pmd
