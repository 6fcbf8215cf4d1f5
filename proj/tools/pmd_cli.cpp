// Command-line front end: pmf / cdf / sample / vote / fit / confusion / bench.
// Exit codes: 0 success, 2 usage or input format, 3 infeasible (with method
// advice), 4 numerical failure.

#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "pmd/aggregate_mle.hpp"
#include "pmd/bench.hpp"
#include "pmd/confusion.hpp"
#include "pmd/csv.hpp"
#include "pmd/dftcf.hpp"
#include "pmd/errors.hpp"
#include "pmd/format.hpp"
#include "pmd/json_out.hpp"
#include "pmd/normal_approx.hpp"
#include "pmd/pmf_array.hpp"
#include "pmd/simulation.hpp"
#include "pmd/spm.hpp"
#include "pmd/threading.hpp"
#include "pmd/voting.hpp"

namespace {

struct Global {
  unsigned threads = pmd::hardware_threads();
  std::uint64_t mem_cap = pmd::kDefaultMemCapCells;
  bool quiet = false;
  bool header = false;  // input CSVs carry a header row
};

std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
  std::vector<int> out;
  for (const auto& field : pmd::split_csv_line(s))
    out.push_back(static_cast<int>(pmd::parse_long(field, what)));
  if (out.empty()) throw pmd::validation_error(what + ": empty list");
  return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string mode_json(const pmd::ModeResult& md) {
  return "{\"x\":" + pmd::json::array(md.x) + ",\"p\":" + pmd::json::num(md.p) + "}";
}

std::string cell_json(const pmd::CellInterval& c) {
  return "{\"predicted\":" + pmd::json::num(c.predicted) +
         ",\"true\":" + pmd::json::num(c.true_class) +
         ",\"mean\":" + pmd::json::num(c.mean) + ",\"lo\":" + pmd::json::num(c.lo) +
         ",\"hi\":" + pmd::json::num(c.hi) + ",\"level\":" + pmd::json::num(c.level) +
         "}";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Poisson multinomial distribution toolkit"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--threads", g.threads, "worker threads (default: all cores)");
  app.add_option("--mem-cap-cells", g.mem_cap, "dense grid cell budget");
  app.add_flag("--quiet", g.quiet, "suppress diagnostics on stderr");
  app.add_flag("--header", g.header, "input CSV files have a header row");

  std::function<int()> run;

  // ---- pmf -----------------------------------------------------------
  auto* pmf_cmd = app.add_subcommand(
      "pmf", "pmf of the count vector: full table or one point");
  {
    auto spm_path = std::make_shared<std::string>();
    auto x_str = std::make_shared<std::string>();
    auto method = std::make_shared<std::string>("exact");
    auto out_path = std::make_shared<std::string>();
    auto b = std::make_shared<std::int64_t>(0);
    auto seed = std::make_shared<std::uint64_t>(0);
    pmf_cmd->add_option("--spm", *spm_path, "row-stochastic matrix CSV")->required();
    pmf_cmd->add_option("--x", *x_str, "outcome vector c1,...,cm");
    pmf_cmd->add_option("--method", *method, "exact | na | sim")
        ->check(CLI::IsMember({"exact", "na", "sim"}));
    pmf_cmd->add_option("--b", *b, "simulation batch size");
    pmf_cmd->add_option("--seed", *seed, "simulation seed");
    pmf_cmd->add_option("--out", *out_path, "output file (.bin binary, else CSV)");
    pmf_cmd->callback([&, spm_path, x_str, method, out_path, b, seed]() {
      run = [&, spm_path, x_str, method, out_path, b, seed]() {
        const pmd::SPM spm = pmd::load_spm_csv(*spm_path, g.header);
        if (x_str->empty()) {
          if (*method != "exact")
            throw pmd::validation_error(
                "the full pmf table requires --method exact; na and sim "
                "evaluate single points (pass --x)");
          const pmd::PmfArray pmf = pmd::pmf_full(spm, g.threads, g.mem_cap);
          if (!g.quiet && pmf.clamped_mass() > 0.0)
            std::fprintf(stderr, "note: clamped negative mass %s\n",
                         pmd::fmt_full(pmf.clamped_mass()).c_str());
          if (out_path->empty()) {
            pmd::write_pmf_csv(pmf, stdout);
          } else if (ends_with(*out_path, ".bin")) {
            pmd::save_pmf_bin(pmf, *out_path);
          } else {
            pmd::save_pmf_csv(pmf, *out_path);
          }
          return 0;
        }
        const std::vector<int> xi = parse_int_list(*x_str, "--x");
        const pmd::OutcomeVector x(xi.begin(), xi.end());
        if (*method == "exact") {
          std::printf("%s\n",
                      pmd::fmt_full(pmd::pmf_at(spm, x, g.threads, g.mem_cap)).c_str());
        } else if (*method == "na") {
          std::printf("%s\n", pmd::fmt_full(pmd::na_pmf_at(spm, x)).c_str());
        } else {
          if (*b < 1 || pmf_cmd->count("--seed") == 0)
            throw pmd::validation_error("--method sim requires --b >= 1 and --seed");
          const pmd::SimEstimate est =
              pmd::sim_pmf_at(spm, x, static_cast<std::uint64_t>(*b), *seed, g.threads);
          std::printf("%s %s\n", pmd::fmt_full(est.prob).c_str(),
                      pmd::fmt_full(est.bound).c_str());
        }
        return 0;
      };
    });
  }

  // ---- cdf -----------------------------------------------------------
  auto* cdf_cmd = app.add_subcommand(
      "cdf", "P(X1 <= c1, ..., X(m-1) <= c(m-1)) in reduced coordinates");
  {
    auto spm_path = std::make_shared<std::string>();
    auto x_str = std::make_shared<std::string>();
    auto method = std::make_shared<std::string>("exact");
    cdf_cmd->add_option("--spm", *spm_path, "row-stochastic matrix CSV")->required();
    cdf_cmd->add_option("--x", *x_str, "reduced point c1,...,c(m-1)")->required();
    cdf_cmd->add_option("--method", *method, "exact | na")
        ->check(CLI::IsMember({"exact", "na"}));
    cdf_cmd->callback([&, spm_path, x_str, method]() {
      run = [&, spm_path, x_str, method]() {
        const pmd::SPM spm = pmd::load_spm_csv(*spm_path, g.header);
        const std::vector<int> xstar = parse_int_list(*x_str, "--x");
        const double p = *method == "exact"
                             ? pmd::cdf_at(spm, xstar, g.threads, g.mem_cap)
                             : pmd::na_cdf_at(spm, xstar);
        std::printf("%s\n", pmd::fmt_full(p).c_str());
        return 0;
      };
    });
  }

  // ---- sample --------------------------------------------------------
  auto* sample_cmd =
      app.add_subcommand("sample", "draw count vectors, one CSV row per draw");
  {
    auto spm_path = std::make_shared<std::string>();
    auto out_path = std::make_shared<std::string>();
    auto meta_path = std::make_shared<std::string>();
    auto b = std::make_shared<std::int64_t>(0);
    auto seed = std::make_shared<std::uint64_t>(0);
    sample_cmd->add_option("--spm", *spm_path, "row-stochastic matrix CSV")->required();
    sample_cmd->add_option("--b", *b, "number of draws")->required();
    sample_cmd->add_option("--seed", *seed, "stream seed")->required();
    sample_cmd->add_option("--out", *out_path, "output CSV (default stdout)");
    sample_cmd->add_option("--meta", *meta_path,
                           "also write run metadata JSON (seed, b, n, m)");
    sample_cmd->callback([&, spm_path, out_path, meta_path, b, seed]() {
      run = [&, spm_path, out_path, meta_path, b, seed]() {
        const pmd::SPM spm = pmd::load_spm_csv(*spm_path, g.header);
        if (*b < 1) throw pmd::validation_error("--b must be >= 1");
        const pmd::SampleBatch batch =
            pmd::sample(spm, static_cast<std::uint64_t>(*b), *seed, g.threads);
        if (out_path->empty())
          pmd::write_samples_csv(batch, stdout);
        else
          pmd::save_samples_csv(batch, *out_path);
        if (!meta_path->empty()) {
          std::FILE* f = std::fopen(meta_path->c_str(), "wb");
          if (!f)
            throw pmd::validation_error("cannot open " + *meta_path +
                                        " for writing");
          std::fprintf(f, "{\"seed\": %llu, \"b\": %lld, \"n\": %d, \"m\": %d}\n",
                       static_cast<unsigned long long>(*seed),
                       static_cast<long long>(*b), spm.n(), spm.m());
          std::fclose(f);
        }
        return 0;
      };
    });
  }

  // ---- vote ----------------------------------------------------------
  auto* vote_cmd = app.add_subcommand(
      "vote", "winner probabilities, tie probability, and the modal outcome");
  {
    auto spm_path = std::make_shared<std::string>();
    auto method = std::make_shared<std::string>("exact");
    auto b = std::make_shared<std::int64_t>(100000);
    auto seed = std::make_shared<std::uint64_t>(1);
    vote_cmd->add_option("--spm", *spm_path, "row-stochastic matrix CSV")->required();
    vote_cmd->add_option("--method", *method, "exact | na | sim (winner probs)")
        ->check(CLI::IsMember({"exact", "na", "sim"}));
    vote_cmd->add_option("--b", *b, "simulation batch size");
    vote_cmd->add_option("--seed", *seed, "simulation seed");
    vote_cmd->callback([&, spm_path, method, b, seed]() {
      run = [&, spm_path, method, b, seed]() {
        const pmd::SPM spm = pmd::load_spm_csv(*spm_path, g.header);
        if (*b < 1) throw pmd::validation_error("--b must be >= 1");
        pmd::VoteOptions opt;
        opt.b = static_cast<std::uint64_t>(*b);
        opt.seed = *seed;
        opt.threads = g.threads;
        opt.mem_cap_cells = g.mem_cap;
        const pmd::VoteMethod vm = *method == "exact" ? pmd::VoteMethod::exact
                                   : *method == "na"  ? pmd::VoteMethod::na
                                                      : pmd::VoteMethod::sim;
        const pmd::WinnerReport rep = pmd::winner_probabilities(spm, vm, opt);
        const pmd::ModeResult md = pmd::mode(spm, g.threads, g.mem_cap);
        std::printf("{\"winner_probs\":%s,\"tie_prob\":%s,\"mode\":%s}\n",
                    pmd::json::array(rep.winner_probs).c_str(),
                    pmd::json::num(rep.tie_prob).c_str(), mode_json(md).c_str());
        return 0;
      };
    });
  }

  // ---- fit -----------------------------------------------------------
  auto* fit_cmd = app.add_subcommand(
      "fit", "maximum-likelihood softmax coefficients for grouped counts");
  {
    auto groups_path = std::make_shared<std::string>();
    auto cov_path = std::make_shared<std::string>();
    auto counts_path = std::make_shared<std::string>();
    auto method = std::make_shared<std::string>("exact");
    auto max_iters = std::make_shared<int>(500);
    fit_cmd->add_option("--groups", *groups_path,
                        "unit-level CSV: group_id, covariates..., category");
    fit_cmd->add_option("--covariates", *cov_path,
                        "unit-level CSV: group_id, covariates...");
    fit_cmd->add_option("--counts", *counts_path, "group-level CSV: group_id, c1..cm");
    fit_cmd->add_option("--method", *method, "per-group pmf route: exact | na")
        ->check(CLI::IsMember({"exact", "na"}));
    fit_cmd->add_option("--max-iters", *max_iters, "iteration budget");
    fit_cmd->callback([&, groups_path, cov_path, counts_path, method, max_iters]() {
      run = [&, groups_path, cov_path, counts_path, method, max_iters]() {
        std::vector<pmd::AggregatedGroup> groups;
        if (!groups_path->empty()) {
          if (!cov_path->empty() || !counts_path->empty())
            throw pmd::validation_error(
                "--groups excludes --covariates/--counts");
          groups = pmd::load_groups_raw(*groups_path, g.header);
        } else if (!cov_path->empty() && !counts_path->empty()) {
          groups = pmd::load_groups_aggregated(*cov_path, *counts_path, g.header);
        } else {
          throw pmd::validation_error(
              "pass --groups FILE, or --covariates FILE with --counts FILE");
        }
        pmd::FitOptions opt;
        opt.max_iterations = *max_iters;
        opt.method =
            *method == "exact" ? pmd::LikMethod::exact : pmd::LikMethod::na;
        opt.threads = g.threads;
        opt.mem_cap_cells = g.mem_cap;
        const pmd::FitResult res = pmd::fit(groups, nullptr, opt);
        std::string out = "{\"beta_hat\":" + pmd::json::array(res.beta_hat);
        if (res.se_available) {
          out += ",\"std_errors\":" + pmd::json::array(res.std_errors);
          out += ",\"ci_lower\":" + pmd::json::array(res.ci_lower);
          out += ",\"ci_upper\":" + pmd::json::array(res.ci_upper);
        } else {
          out += ",\"std_errors\":null,\"ci_lower\":null,\"ci_upper\":null";
        }
        out += ",\"loglik\":" + pmd::json::num(res.loglik);
        out += ",\"converged\":" + pmd::json::boolean(res.converged);
        out += ",\"iterations\":" + pmd::json::num(res.iterations);
        out += ",\"se_available\":" + pmd::json::boolean(res.se_available);
        out += ",\"degenerate\":" + pmd::json::boolean(res.degenerate) + "}";
        std::printf("%s\n", out.c_str());
        return 0;
      };
    });
  }

  // ---- confusion -----------------------------------------------------
  auto* conf_cmd = app.add_subcommand(
      "confusion", "uncertainty of a classifier's confusion matrix");
  {
    auto probs_path = std::make_shared<std::string>();
    auto level = std::make_shared<double>(0.95);
    auto cell_str = std::make_shared<std::string>();
    auto marginal_str = std::make_shared<std::string>();
    auto joint_path = std::make_shared<std::string>();
    conf_cmd->add_option("--probs", *probs_path,
                         "classifier CSV: true_label, p1..pm")
        ->required();
    conf_cmd->add_option("--level", *level, "central interval level (default 0.95)");
    conf_cmd->add_option("--cell", *cell_str, "one cell as predicted,true (1-based)");
    conf_cmd->add_option("--marginal", *marginal_str,
                         "dump one cell's count pmf as CSV: predicted,true");
    conf_cmd->add_option("--joint", *joint_path,
                         "m x m counts CSV: print its joint probability");
    conf_cmd->callback([&, probs_path, level, cell_str, marginal_str, joint_path]() {
      run = [&, probs_path, level, cell_str, marginal_str, joint_path]() {
        const pmd::ClassifierOutput data =
            pmd::load_classifier_csv(*probs_path, g.header);
        const pmd::ConfusionModel model = pmd::build_confusion_pmd(data);
        if (!joint_path->empty()) {
          const pmd::Matrix x = pmd::read_csv_matrix(*joint_path, g.header);
          std::printf(
              "%s\n",
              pmd::fmt_full(pmd::joint_pmf(model, x, g.threads, g.mem_cap)).c_str());
          return 0;
        }
        if (!marginal_str->empty()) {
          const std::vector<int> jk = parse_int_list(*marginal_str, "--marginal");
          if (jk.size() != 2)
            throw pmd::validation_error("--marginal wants predicted,true");
          const std::vector<double> pmf =
              pmd::cell_marginal_pmf(model, jk[0], jk[1]);
          std::printf("count,p\n");
          for (std::size_t c = 0; c < pmf.size(); ++c)
            std::printf("%zu,%s\n", c, pmd::fmt_full(pmf[c]).c_str());
          return 0;
        }
        if (!cell_str->empty()) {
          const std::vector<int> jk = parse_int_list(*cell_str, "--cell");
          if (jk.size() != 2) throw pmd::validation_error("--cell wants predicted,true");
          std::printf("%s\n",
                      cell_json(pmd::cell_interval(model, jk[0], jk[1], *level)).c_str());
          return 0;
        }
        // full dump: every cell of every populated class
        std::string out = "{\"m\":" + pmd::json::num(model.m);
        out += ",\"class_counts\":" + pmd::json::array(model.class_counts);
        out += ",\"cells\":[";
        bool first = true;
        for (int k = 1; k <= model.m; ++k) {
          if (model.class_counts[k - 1] == 0) continue;  // marginals undefined
          for (int j = 1; j <= model.m; ++j) {
            if (!first) out += ',';
            first = false;
            out += cell_json(pmd::cell_interval(model, j, k, *level));
          }
        }
        out += "]}";
        std::printf("%s\n", out.c_str());
        return 0;
      };
    });
  }

  // ---- bench ---------------------------------------------------------
  auto* bench_cmd = app.add_subcommand(
      "bench", "accuracy and timing studies on random distributions");
  {
    auto study = std::make_shared<std::string>();
    auto n_str = std::make_shared<std::string>();
    auto m = std::make_shared<int>(3);
    auto m_str = std::make_shared<std::string>();
    auto replicates = std::make_shared<int>(0);
    auto seed = std::make_shared<std::uint64_t>(1);
    auto b = std::make_shared<std::int64_t>(1000000);
    auto out_path = std::make_shared<std::string>();
    bench_cmd
        ->add_option("--study", *study,
                     "binomial | poisson-binomial | enumeration | na-vs-exact | "
                     "sim-vs-exact | timing")
        ->required();
    bench_cmd->add_option("--n", *n_str, "comma list of n values")->required();
    bench_cmd->add_option("--m", *m, "category count (default 3)");
    bench_cmd->add_option("--m-list", *m_str, "comma list of m values (timing)");
    bench_cmd->add_option("--replicates", *replicates, "draws per point");
    bench_cmd->add_option("--seed", *seed, "study seed");
    bench_cmd->add_option("--b", *b, "simulation batch size (sim-vs-exact)");
    bench_cmd->add_option("--out", *out_path, "CSV output file (default stdout)");
    bench_cmd->callback([&, study, n_str, m, m_str, replicates, seed, b, out_path]() {
      run = [&, study, n_str, m, m_str, replicates, seed, b, out_path]() {
        std::vector<pmd::StudyRow> rows;
        const std::vector<int> n_values = parse_int_list(*n_str, "--n");
        if (*study == "timing") {
          pmd::TimingConfig cfg;
          cfg.n_values = n_values;
          cfg.m_values = m_str->empty() ? std::vector<int>{*m}
                                        : parse_int_list(*m_str, "--m-list");
          if (*replicates > 0) cfg.replicates = *replicates;
          cfg.seed = *seed;
          cfg.threads = g.threads;
          cfg.mem_cap_cells = g.mem_cap;
          rows = pmd::timing_study(cfg);
        } else {
          pmd::StudyConfig cfg;
          cfg.study = pmd::parse_study(*study);
          cfg.n_values = n_values;
          cfg.m = *m;
          if (*replicates > 0) cfg.replicates = *replicates;
          cfg.seed = *seed;
          if (*b < 1) throw pmd::validation_error("--b must be >= 1");
          cfg.b = *b;
          cfg.threads = g.threads;
          cfg.mem_cap_cells = g.mem_cap;
          rows = pmd::accuracy_study(cfg);
        }
        if (out_path->empty()) {
          std::printf("study,n,m,metric,value\n");
          for (const auto& r : rows)
            std::printf("%s,%d,%d,%s,%s\n", r.study.c_str(), r.n, r.m,
                        r.metric.c_str(), pmd::fmt_full(r.value).c_str());
        } else {
          pmd::save_study_csv(rows, *out_path);
        }
        if (!g.quiet) std::fputs(pmd::study_table(rows).c_str(), stderr);
        return 0;
      };
    });
  }

  for (auto* sub : {pmf_cmd, cdf_cmd, sample_cmd, vote_cmd, fit_cmd, conf_cmd,
                    bench_cmd})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    return run ? run() : 2;
  } catch (const pmd::infeasible_error& e) {
    std::fprintf(stderr, "error: %s\n%s\n", e.what(), e.advice.c_str());
    return 3;
  } catch (const pmd::numerical_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const pmd::error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
}
