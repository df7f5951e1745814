#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "flexrl/cli.hpp"
#include "flexrl/io.hpp"
#include "flexrl/plot.hpp"

using namespace flexrl;
namespace fs = std::filesystem;

namespace {

int run_cli(std::initializer_list<const char*> args) {
  std::vector<const char*> argv = {"flexrl"};
  argv.insert(argv.end(), args.begin(), args.end());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "flexrl_test_harness" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config file parsing: pairs, comments, malformed lines") {
  fs::path dir = fresh_dir("config");
  {
    std::ofstream out(dir / "ok.cfg");
    out << "# experiment defaults\n";
    out << "steps = 500\n";
    out << "reward_scale=2.5  # inline comment\n";
    out << "\n";
    out << "lp_mode = init_dist\n";
  }
  auto kv = read_config_file((dir / "ok.cfg").string());
  CHECK(kv.at("steps") == "500");
  CHECK(kv.at("reward_scale") == "2.5");
  CHECK(kv.at("lp_mode") == "init_dist");

  {
    std::ofstream out(dir / "bad.cfg");
    out << "steps 500\n";
  }
  CHECK_THROWS_AS(read_config_file((dir / "bad.cfg").string()), ConfigError);
  CHECK_THROWS_AS(read_config_file((dir / "missing.cfg").string()), IoError);
}

TEST_CASE("results.csv: keyed rows, append-only, overwrite flag") {
  fs::path dir = fresh_dir("results");
  std::string path = (dir / "results.csv").string();
  ResultRow a{"grid4", "2p", "flex_f_q", "iql(0.7)", 0, 91.0, 91.0, 0.0};
  ResultRow b = a;
  b.seed = 1;
  b.final_norm_return = 93.0;
  append_results(path, {a, b}, false);
  CHECK(read_results_csv(path).size() == 2);

  // Same key without the flag is rejected and the file is unchanged.
  ResultRow a2 = a;
  a2.final_norm_return = 50.0;
  CHECK_THROWS_AS(append_results(path, {a2}, false), IoError);
  CHECK(read_results_csv(path)[0].final_norm_return == doctest::Approx(91.0));

  append_results(path, {a2}, true);
  auto rows = read_results_csv(path);
  CHECK(rows.size() == 2);
  CHECK(rows[0].final_norm_return == doctest::Approx(50.0));

  // Distinct divergence spec is a new key.
  ResultRow c = a;
  c.divergence = "soft_chi2";
  append_results(path, {c}, false);
  CHECK(read_results_csv(path).size() == 3);
}

TEST_CASE("FLEXRL_OUT overrides the output root") {
  unsetenv("FLEXRL_OUT");
  CHECK(output_root("fallback") == "fallback");
  setenv("FLEXRL_OUT", "/tmp/somewhere", 1);
  CHECK(output_root("fallback") == "/tmp/somewhere");
  unsetenv("FLEXRL_OUT");
}

TEST_CASE("cli gen-data: reproducible files and usage errors") {
  fs::path dir = fresh_dir("gen");
  std::string a = (dir / "a").string(), b = (dir / "b").string();
  CHECK(run_cli({"gen-data", "--env", "grid3", "--mixture", "2p", "--seed", "7",
                 "--n-trajectories", "40", "--horizon", "15", "--out", a.c_str()}) == 0);
  CHECK(run_cli({"gen-data", "--env", "grid3", "--mixture", "2p", "--seed", "7",
                 "--n-trajectories", "40", "--horizon", "15", "--out", b.c_str()}) == 0);
  for (const char* ext : {".csv", ".init", ".meta"})
    CHECK(slurp(dir / "a" / ("grid3_2p_s7" + std::string(ext))) ==
          slurp(dir / "b" / ("grid3_2p_s7" + std::string(ext))));

  CHECK(run_cli({"gen-data", "--env", "grid3", "--mixture", "9p", "--out", a.c_str()}) == 2);
  CHECK(run_cli({"gen-data", "--env", "pole", "--out", a.c_str()}) == 2);
  CHECK(run_cli({"nonsense"}) == 2);
}

TEST_CASE("cli train/eval: outputs, determinism, result keying, env hash guard") {
  fs::path dir = fresh_dir("train");
  std::string out = dir.string();
  CHECK(run_cli({"gen-data", "--env", "grid3", "--mixture", "2p", "--seed", "3",
                 "--n-trajectories", "40", "--horizon", "15", "--out", out.c_str(),
                 "--name", "data"}) == 0);
  std::string data = (dir / "data").string();

  auto train_once = [&](const char* run_dir) {
    return run_cli({"train", "--env", "grid3", "--data", data.c_str(), "--algorithm",
                    "flex-f-q", "--preset", "iql(0.7)", "--steps", "400", "--batch-size",
                    "32", "--eval-interval", "200", "--seeds", "2", "--out", run_dir,
                    "--name", "run"});
  };
  std::string r1 = (dir / "r1").string(), r2 = (dir / "r2").string();
  CHECK(train_once(r1.c_str()) == 0);
  CHECK(train_once(r2.c_str()) == 0);
  for (const char* f : {"run_seed0.metrics.csv", "run_seed0.ckpt", "run_seed1.metrics.csv"})
    CHECK(slurp(dir / "r1" / f) == slurp(dir / "r2" / f));
  auto rows = read_results_csv((dir / "r1" / "results.csv").string());
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].algorithm == "flex_f_q");
  CHECK(rows[0].divergence == "iql(0.7)");
  CHECK(rows[0].mean_over_seeds == doctest::Approx(rows[1].mean_over_seeds));

  // Re-running without --overwrite hits the append-only guard.
  CHECK(train_once(r1.c_str()) == 2);

  // A different env fails the dataset hash check.
  CHECK(run_cli({"train", "--env", "grid3", "--gamma", "0.8", "--data", data.c_str(),
                 "--steps", "10", "--out", r1.c_str()}) == 2);

  CHECK(run_cli({"eval", "--env", "grid3", "--checkpoint",
                 (dir / "r1" / "run_seed0.ckpt").string().c_str(), "--greedy"}) == 0);
  CHECK(run_cli({"eval", "--env", "grid3", "--checkpoint", "/nope.ckpt"}) == 2);
}

TEST_CASE("cli config file feeds defaults, flags override") {
  fs::path dir = fresh_dir("cfg");
  std::string out = dir.string();
  CHECK(run_cli({"gen-data", "--env", "grid3", "--mixture", "2p", "--seed", "4",
                 "--n-trajectories", "30", "--horizon", "12", "--out", out.c_str(),
                 "--name", "d"}) == 0);
  {
    std::ofstream cfg(dir / "exp.cfg");
    cfg << "steps = 200\n";
    cfg << "batch_size = 16\n";
    cfg << "eval_interval = 100\n";
  }
  std::string data = (dir / "d").string(), cfgp = (dir / "exp.cfg").string();
  CHECK(run_cli({"train", "--env", "grid3", "--data", data.c_str(), "--config",
                 cfgp.c_str(), "--out", out.c_str(), "--name", "c1"}) == 0);
  auto m1 = read_metrics_csv((dir / "c1_seed0.metrics.csv").string());
  CHECK(m1.back().step == 200);

  CHECK(run_cli({"train", "--env", "grid3", "--data", data.c_str(), "--config",
                 cfgp.c_str(), "--steps", "300", "--out", out.c_str(), "--name",
                 "c2"}) == 2);  // same result key as c1, no overwrite flag
  CHECK(run_cli({"train", "--env", "grid3", "--data", data.c_str(), "--config",
                 cfgp.c_str(), "--steps", "300", "--preset", "iql(0.5)", "--out",
                 out.c_str(), "--name", "c2"}) == 0);
  auto m2 = read_metrics_csv((dir / "c2_seed0.metrics.csv").string());
  CHECK(m2.back().step == 300);
}

TEST_CASE("cli plot: function panels, domain truncation, trace, error paths") {
  fs::path dir = fresh_dir("plot");
  std::string svg = (dir / "f.svg").string();
  CHECK(run_cli({"plot", "--preset", "iql(0.7)", "--out", svg.c_str()}) == 0);
  std::string body = slurp(svg);
  CHECK(body.find("panel_gstar") != std::string::npos);
  CHECK(body.find("panel_loss") != std::string::npos);
  CHECK(body.find("iql") != std::string::npos);

  std::string svg2 = (dir / "lecam.svg").string();
  CHECK(run_cli({"plot", "--g-minus", "le_cam", "--g-plus", "le_cam", "--out",
                 svg2.c_str()}) == 0);
  CHECK(slurp(svg2).find("data-e-max=\"0.25\"") != std::string::npos);

  // Trace from a real metrics file.
  std::vector<MetricsRow> rows;
  for (int i = 1; i <= 5; ++i) {
    MetricsRow r;
    r.step = i * 100;
    r.alpha_plus = 1.4 + 0.01 * i;
    r.alpha_minus = 3.3 - 0.02 * i;
    r.beta = 1.0 + 0.005 * i;
    rows.push_back(r);
  }
  std::string mcsv = (dir / "m.csv").string(), svg3 = (dir / "t.svg").string();
  write_metrics_csv(rows, mcsv);
  CHECK(run_cli({"plot", "--metrics", mcsv.c_str(), "--out", svg3.c_str()}) == 0);
  std::string trace = slurp(svg3);
  CHECK(trace.find("id=\"alpha_plus\"") != std::string::npos);
  CHECK(trace.find("id=\"beta\"") != std::string::npos);

  // Empty metrics file and missing inputs exit 2.
  std::string empty = (dir / "empty.csv").string();
  write_metrics_csv({}, empty);
  CHECK(run_cli({"plot", "--metrics", empty.c_str(), "--out", svg3.c_str()}) == 2);
  CHECK(run_cli({"plot", "--out", svg3.c_str()}) == 2);
  CHECK(run_cli({"plot", "--preset", "iql(0.7)"}) == 2);
}

TEST_CASE("cli check: single suite passes and reports") {
  fs::path dir = fresh_dir("check");
  std::string out = dir.string();
  CHECK(run_cli({"check", "--suite", "equivalence", "--out", out.c_str()}) == 0);
  CHECK(run_cli({"check", "--suite", "perfdiff", "--out", out.c_str()}) == 0);
  CHECK(run_cli({"check", "--suite", "bogus", "--out", out.c_str()}) == 2);
}

TEST_CASE("cli sweep: small grid writes aggregated results") {
  fs::path dir = fresh_dir("sweep");
  std::string out = dir.string();
  CHECK(run_cli({"sweep", "--env", "grid3", "--mixtures", "2p", "--algorithms", "flex-f-q",
                 "--divergences", "iql(0.7),soft_chi2", "--seeds", "2", "--steps", "200",
                 "--n-trajectories", "30", "--horizon", "12", "--out", out.c_str()}) == 0);
  auto rows = read_results_csv((dir / "results.csv").string());
  CHECK(rows.size() == 4);  // 2 divergences x 2 seeds
}

#include "flexrl/checks.hpp"

TEST_CASE("deliberate-fault harness: a corrupted composition fails conjugacy") {
  // Healthy compositions pass with a wide margin.
  FlexF good = compose_flex(DivergenceFn::chi2(), DivergenceFn::chi2(), 2.0, 1.0, 0.5);
  CHECK(conjugacy_max_gap(good, 60) <= 1e-7);

  // Drop the linear-correction slope, as a table typo would.
  FlexF corrupted = good;
  corrupted.k_g = 0.0;
  CHECK(conjugacy_max_gap(corrupted, 60) > 1e-6);

  // A wrong conjugate-side threshold is also caught.
  FlexF shifted = good;
  shifted.beta_e += 0.2;
  CHECK(conjugacy_max_gap(shifted, 60) > 1e-6);
}

TEST_CASE("equivalence report table") {
  std::vector<EquivalenceRow> table;
  SuiteResult r = run_equivalence_suite(CheckOptions{}, &table);
  CHECK(r.passed);
  REQUIRE(table.size() == 7);  // xql + 5 expectiles + mse
  fs::path dir = fresh_dir("eqreport");
  std::string path = (dir / "equivalence_report.csv").string();
  write_equivalence_report(table, path);
  std::string body = slurp(path);
  CHECK(body.find("reference,flex,max_gap,pass") == 0);
  CHECK(body.find("xql,preset xql,") != std::string::npos);
  CHECK(body.find("mse,chi2,") != std::string::npos);
}
