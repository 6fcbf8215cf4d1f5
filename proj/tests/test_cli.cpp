#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "helpers.hpp"
#include "pmd/dftcf.hpp"
#include "pmd/format.hpp"
#include "pmd/pmf_array.hpp"

namespace {

struct CliResult {
  int code = -1;
  std::string out, err;
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

CliResult run_cli(const std::string& args) {
  static int counter = 0;
  const std::string tag = "/tmp/pmd_cli_" + std::to_string(++counter);
  const std::string out_path = tag + ".out", err_path = tag + ".err";
  const std::string cmd =
      std::string(PMD_CLI_PATH) + " " + args + " >" + out_path + " 2>" + err_path;
  const int raw = std::system(cmd.c_str());
  CliResult res;
  res.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  res.out = slurp(out_path);
  res.err = slurp(err_path);
  std::remove(out_path.c_str());
  std::remove(err_path.c_str());
  return res;
}

std::string data(const std::string& name) { return std::string(PMD_DATA_DIR) + "/" + name; }

std::size_t line_count(const std::string& s) {
  std::size_t n = 0;
  for (char c : s)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("point pmf queries print one full-precision value", "[cli]") {
  CliResult r = run_cli("pmf --spm " + data("example1.csv") + " --x 4,0,0");
  REQUIRE(r.code == 0);
  CHECK_THAT(std::stod(r.out), Catch::Matchers::WithinAbs(0.016, 1e-12));

  CliResult r2 = run_cli("pmf --spm " + data("example1.csv") + " --x 1,3,0");
  REQUIRE(r2.code == 0);
  CHECK_THAT(std::stod(r2.out), Catch::Matchers::WithinAbs(0.0236, 1e-12));

  SECTION("the approximate method returns a nearby probability") {
    CliResult na = run_cli("pmf --spm " + data("example1.csv") + " --x 1,3,0 --method na");
    REQUIRE(na.code == 0);
    double v = std::stod(na.out);
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }

  SECTION("the simulation method needs a batch size and seed") {
    CliResult bad = run_cli("pmf --spm " + data("example1.csv") + " --x 1,3,0 --method sim");
    CHECK(bad.code == 2);
    CliResult ok = run_cli("pmf --spm " + data("example1.csv") +
                           " --x 1,3,0 --method sim --b 20000 --seed 9");
    REQUIRE(ok.code == 0);
    std::istringstream ss(ok.out);
    double prob = -1.0, bound = -1.0;
    ss >> prob >> bound;
    CHECK(prob >= 0.0);
    CHECK(prob <= 1.0);
    CHECK_THAT(bound,
               Catch::Matchers::WithinAbs(std::sqrt(1.0 / (2.0 * M_PI * 20000)), 1e-12));
  }

  SECTION("off-support points are usage errors") {
    CliResult bad = run_cli("pmf --spm " + data("example1.csv") + " --x 4,0,1");
    CHECK(bad.code == 2);
    CHECK(bad.err.find("error:") != std::string::npos);
  }

  SECTION("--header skips a label row in the input") {
    const std::string tmp = "/tmp/pmd_cli_hdr.csv";
    {
      std::ofstream f(tmp);
      f << "c1,c2,c3\n0.1,0.2,0.7\n0.5,0.2,0.3\n0.4,0.5,0.1\n0.8,0.1,0.1\n";
    }
    CliResult with = run_cli("pmf --spm " + tmp + " --header --x 4,0,0");
    REQUIRE(with.code == 0);
    CHECK_THAT(std::stod(with.out), Catch::Matchers::WithinAbs(0.016, 1e-12));
    CHECK(run_cli("pmf --spm " + tmp + " --x 4,0,0").code == 2);  // header read as data
    std::remove(tmp.c_str());
  }
}

TEST_CASE("full pmf tables stream as CSV and serialize to binary", "[cli]") {
  CliResult r = run_cli("pmf --spm " + data("example1.csv"));
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("x1,x2,p\n", 0) == 0);
  CHECK(line_count(r.out) == 16);  // header + C(6,2) support rows

  SECTION("the binary round-trips through the library loader") {
    const std::string bin = "/tmp/pmd_cli_table.bin";
    CliResult w = run_cli("pmf --spm " + data("example1.csv") + " --out " + bin);
    REQUIRE(w.code == 0);
    pmd::PmfArray back = pmd::load_pmf_bin(bin);
    pmd::PmfArray want = pmd::pmf_full(example1_spm());
    REQUIRE(back.cells() == want.cells());
    CHECK(std::memcmp(back.data(), want.data(), want.cells() * sizeof(double)) == 0);
    std::remove(bin.c_str());
  }

  SECTION("approximate methods refuse to emit a full table") {
    CliResult bad = run_cli("pmf --spm " + data("example1.csv") + " --method na");
    CHECK(bad.code == 2);
  }
}

TEST_CASE("infeasible grids exit with the advice channel", "[cli]") {
  CliResult r = run_cli("pmf --spm " + data("big_m8.csv"));
  CHECK(r.code == 3);
  CHECK(r.err.find("use SIM (m moderate, n small)") != std::string::npos);

  SECTION("a tightened cap trips the same path") {
    CliResult capped =
        run_cli("pmf --spm " + data("voting10x3.csv") + " --mem-cap-cells 50");
    CHECK(capped.code == 3);
    CHECK(capped.err.find("use") != std::string::npos);
  }
}

TEST_CASE("cumulative queries match the library", "[cli]") {
  CliResult r = run_cli("cdf --spm " + data("example1.csv") + " --x 1,1");
  REQUIRE(r.code == 0);
  double want = pmd::cdf_at(example1_spm(), {1, 1});
  CHECK(std::stod(r.out) == want);  // full-precision print, exact round-trip

  CliResult na = run_cli("cdf --spm " + data("example1.csv") + " --x 1,1 --method na");
  REQUIRE(na.code == 0);
  CHECK_THAT(std::stod(na.out), Catch::Matchers::WithinAbs(want, 0.05));

  CliResult bad = run_cli("cdf --spm " + data("example1.csv") + " --x 9,9");
  CHECK(bad.code == 2);
}

TEST_CASE("sampling from the command line is seeded and deterministic", "[cli]") {
  const std::string args = "sample --spm " + data("example1.csv") + " --b 5 --seed 7";
  CliResult a = run_cli(args);
  REQUIRE(a.code == 0);
  CHECK(a.out.rfind("x1,x2,x3\n", 0) == 0);
  CHECK(line_count(a.out) == 6);

  CliResult b = run_cli(args);
  CHECK(a.out == b.out);

  CliResult c = run_cli("sample --spm " + data("example1.csv") + " --b 5 --seed 8");
  CHECK(a.out != c.out);

  CliResult bad = run_cli("sample --spm " + data("example1.csv") + " --b 5");
  CHECK(bad.code == 2);  // seed is required
}

TEST_CASE("sampling can emit a run-metadata file", "[cli]") {
  const std::string meta = "/tmp/pmd_cli_meta.json";
  std::remove(meta.c_str());
  CliResult r = run_cli("sample --spm " + data("example1.csv") +
                        " --b 5 --seed 7 --meta " + meta);
  REQUIRE(r.code == 0);
  std::ifstream in(meta);
  REQUIRE(in.good());
  nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j["seed"].get<std::uint64_t>() == 7);
  CHECK(j["b"].get<std::int64_t>() == 5);
  CHECK(j["n"].get<int>() == 4);
  CHECK(j["m"].get<int>() == 3);
  std::remove(meta.c_str());
}

TEST_CASE("the election report matches its reference figures", "[cli]") {
  CliResult r = run_cli("vote --spm " + data("voting10x3.csv"));
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  REQUIRE(j["winner_probs"].size() == 3);
  CHECK_THAT(j["winner_probs"][0].get<double>(), Catch::Matchers::WithinAbs(0.109, 5e-4));
  CHECK_THAT(j["winner_probs"][1].get<double>(), Catch::Matchers::WithinAbs(0.345, 5e-4));
  // the third value's exact probability is 0.3735566; the 3-decimal reference
  // value 0.373 is truncated, not rounded: allow one digit in the last place
  CHECK_THAT(j["winner_probs"][2].get<double>(), Catch::Matchers::WithinAbs(0.373, 1e-3));
  CHECK_THAT(j["tie_prob"].get<double>(), Catch::Matchers::WithinAbs(0.173, 1.5e-3));
  CHECK(j["mode"]["x"] == nlohmann::json::array({2, 4, 4}));
  CHECK_THAT(j["mode"]["p"].get<double>(), Catch::Matchers::WithinAbs(0.0864, 5e-5));

  SECTION("simulated winner probabilities stay close and rerun identically") {
    const std::string args =
        "vote --spm " + data("voting10x3.csv") + " --method sim --b 50000 --seed 3";
    CliResult s1 = run_cli(args);
    REQUIRE(s1.code == 0);
    auto js = nlohmann::json::parse(s1.out);
    for (int c = 0; c < 3; ++c)
      CHECK_THAT(js["winner_probs"][c].get<double>(),
                 Catch::Matchers::WithinAbs(j["winner_probs"][c].get<double>(), 0.02));
    CliResult s2 = run_cli(args);
    CHECK(s1.out == s2.out);
  }
}

TEST_CASE("coefficient fits emit a machine-readable report", "[cli]") {
  CliResult r = run_cli("fit --groups " + data("toy_groups.csv"));
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["converged"].get<bool>());
  REQUIRE(j["beta_hat"].size() == 1);       // m - 1 rows
  CHECK(j["beta_hat"][0].size() == 2);      // intercept + one covariate
  CHECK(j["loglik"].get<double>() < 0.0);
  CHECK(j["se_available"].get<bool>());
  CHECK(j["std_errors"][0].size() == 2);
  CHECK(j["ci_lower"][0][0].get<double>() < j["ci_upper"][0][0].get<double>());
  CHECK(j["iterations"].get<int>() >= 1);

  CliResult conflicted = run_cli("fit --groups " + data("toy_groups.csv") +
                                 " --covariates " + data("toy_groups.csv"));
  CHECK(conflicted.code == 2);

  CliResult missing = run_cli("fit --covariates " + data("toy_groups.csv"));
  CHECK(missing.code == 2);
}

TEST_CASE("confusion-matrix uncertainty from classifier scores", "[cli]") {
  const std::string probs = data("toy_classifier.csv");

  SECTION("a single cell interval") {
    CliResult r = run_cli("confusion --probs " + probs + " --cell 1,1");
    REQUIRE(r.code == 0);
    auto j = nlohmann::json::parse(r.out);
    CHECK(j["predicted"] == 1);
    CHECK(j["true"] == 1);
    CHECK_THAT(j["mean"].get<double>(), Catch::Matchers::WithinAbs(50.0, 1e-9));
    CHECK(j["lo"] == 40);
    CHECK(j["hi"] == 60);
    CHECK(j["level"] == 0.95);
  }

  SECTION("the full dump covers populated classes only") {
    CliResult r = run_cli("confusion --probs " + probs);
    REQUIRE(r.code == 0);
    auto j = nlohmann::json::parse(r.out);
    CHECK(j["m"] == 2);
    CHECK(j["class_counts"] == nlohmann::json::array({100, 0}));
    CHECK(j["cells"].size() == 2);  // class 2 has no units
  }

  SECTION("a cell's full count distribution") {
    CliResult r = run_cli("confusion --probs " + probs + " --marginal 1,1");
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("count,p\n", 0) == 0);
    CHECK(line_count(r.out) == 102);  // header + counts 0..100
    std::istringstream ss(r.out);
    std::string line;
    std::getline(ss, line);
    double total = 0.0;
    while (std::getline(ss, line)) {
      auto comma = line.find(',');
      REQUIRE(comma != std::string::npos);
      total += std::stod(line.substr(comma + 1));
    }
    CHECK_THAT(total, Catch::Matchers::WithinAbs(1.0, 1e-10));
  }

  SECTION("joint probabilities of a full count matrix") {
    const std::string joint = "/tmp/pmd_cli_joint.csv";
    {
      std::ofstream f(joint);
      f << "50,0\n50,0\n";
    }
    CliResult r = run_cli("confusion --probs " + probs + " --joint " + joint);
    REQUIRE(r.code == 0);
    double v = std::stod(r.out);
    CHECK(v > 0.0);
    CHECK(v < 1.0);

    {
      std::ofstream f(joint);
      f << "50,0\n49,0\n";  // column sum misses the class size
    }
    CliResult bad = run_cli("confusion --probs " + probs + " --joint " + joint);
    CHECK(bad.code == 2);
    std::remove(joint.c_str());
  }

  SECTION("interval levels are validated") {
    CliResult bad = run_cli("confusion --probs " + probs + " --cell 1,1 --level 1.5");
    CHECK(bad.code == 2);
  }
}

TEST_CASE("study runs print CSV rows plus a readable table", "[cli]") {
  CliResult r = run_cli("bench --study enumeration --n 3 --m 3 --replicates 2 --seed 5");
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("study,n,m,metric,value\n", 0) == 0);
  CHECK(line_count(r.out) == 2);
  auto last_comma = r.out.rfind(',');
  CHECK(std::stod(r.out.substr(last_comma + 1)) < 1e-12);
  CHECK(r.err.find("max_abs_diff") != std::string::npos);

  SECTION("quiet mode silences the table") {
    CliResult q =
        run_cli("bench --study enumeration --n 3 --m 3 --replicates 2 --seed 5 --quiet");
    REQUIRE(q.code == 0);
    CHECK(q.err.empty());
    CHECK(q.out == r.out);
  }

  SECTION("timing studies accept an m list") {
    CliResult t =
        run_cli("bench --study timing --n 4 --m-list 2,3 --replicates 1 --quiet");
    REQUIRE(t.code == 0);
    CHECK(line_count(t.out) == 3);  // header + two rows
  }

  SECTION("unknown studies are usage errors") {
    CliResult bad = run_cli("bench --study bogus --n 3");
    CHECK(bad.code == 2);
  }
}

TEST_CASE("usage errors and help behave like a well-mannered tool", "[cli]") {
  CHECK(run_cli("").code == 2);                  // a subcommand is required
  CHECK(run_cli("frobnicate").code == 2);        // unknown subcommand
  CHECK(run_cli("pmf").code == 2);               // missing --spm
  CHECK(run_cli("pmf --bogus-flag x").code == 2);
  CHECK(run_cli("--help").code == 0);
  CHECK(run_cli("pmf --help").code == 0);
  CHECK(run_cli("pmf --spm /nonexistent/file.csv").code == 2);
}

TEST_CASE("outputs are byte-identical across thread counts", "[cli]") {
  const std::string table = "pmf --spm " + data("voting10x3.csv");
  CliResult t1 = run_cli(table + " --threads 1");
  CliResult t4 = run_cli(table + " --threads 4");
  REQUIRE(t1.code == 0);
  REQUIRE(t4.code == 0);
  CHECK(t1.out == t4.out);

  const std::string sim = "pmf --spm " + data("voting10x3.csv") +
                          " --x 2,4,4 --method sim --b 100000 --seed 11";
  CliResult s1 = run_cli(sim + " --threads 1");
  CliResult s4 = run_cli(sim + " --threads 4");
  REQUIRE(s1.code == 0);
  CHECK(s1.out == s4.out);

  const std::string draws = "sample --spm " + data("example1.csv") + " --b 1000 --seed 2";
  CliResult d1 = run_cli(draws + " --threads 1");
  CliResult d4 = run_cli(draws + " --threads 4");
  REQUIRE(d1.code == 0);
  CHECK(d1.out == d4.out);
}
