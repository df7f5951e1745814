#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "flexrl/dataset.hpp"
#include "flexrl/lp_oracle.hpp"

using namespace flexrl;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "flexrl_test_dataset";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("2p mixture: two deterministic components, expert at 100") {
  TabularMdp grid = make_gridworld(4, 4, 0.95, 0.1);
  OfflineDataset ds = synthesize_dataset(grid, "2p", 60, 25, 7);

  REQUIRE(ds.components.size() == 2);
  CHECK(ds.components[0].target_return == doctest::Approx(40.0));
  CHECK(std::fabs(ds.components[0].achieved_return - 40.0) <= 10.0);
  CHECK(ds.components[1].achieved_return == doctest::Approx(100.0).epsilon(1e-6));
  CHECK(ds.components[0].checkpoint_index != ds.components[1].checkpoint_index);
  CHECK(ds.initial_states.size() == 60);
  CHECK(ds.transitions.size() == 60 * 25);
  check_environment_consistency(ds, grid);
}

TEST_CASE("4p and 10p mixtures: calibrated within 10 points and monotone") {
  TabularMdp grid = make_gridworld(4, 4, 0.95, 0.1);
  for (const char* mixture : {"4p", "10p"}) {
    CAPTURE(mixture);
    OfflineDataset ds = synthesize_dataset(grid, mixture, 100, 25, 3);
    double prev = -1e9;
    for (const ComponentInfo& c : ds.components) {
      CHECK(std::fabs(c.achieved_return - c.target_return) <= 10.0);
      CHECK(c.achieved_return >= prev - 10.0);  // ordered by expertise
      prev = c.achieved_return;
    }
    check_environment_consistency(ds, grid);
  }
}

TEST_CASE("dataset synthesis is a pure function of its arguments") {
  TabularMdp grid = make_gridworld(4, 4, 0.95, 0.1);
  OfflineDataset a = synthesize_dataset(grid, "2p", 40, 20, 99);
  OfflineDataset b = synthesize_dataset(grid, "2p", 40, 20, 99);
  REQUIRE(a.transitions.size() == b.transitions.size());
  for (std::size_t i = 0; i < a.transitions.size(); ++i) {
    CHECK(a.transitions[i].s == b.transitions[i].s);
    CHECK(a.transitions[i].a == b.transitions[i].a);
    CHECK(a.transitions[i].r == b.transitions[i].r);
    CHECK(a.transitions[i].s_next == b.transitions[i].s_next);
    CHECK(a.transitions[i].done == b.transitions[i].done);
  }
  CHECK(a.initial_states == b.initial_states);

  OfflineDataset c = synthesize_dataset(grid, "2p", 40, 20, 100);
  bool identical = a.transitions.size() == c.transitions.size();
  if (identical)
    for (std::size_t i = 0; i < a.transitions.size(); ++i)
      if (a.transitions[i].s != c.transitions[i].s ||
          a.transitions[i].s_next != c.transitions[i].s_next)
        identical = false;
  CHECK_FALSE(identical);
}

TEST_CASE("file round trip is byte-identical and metadata survives") {
  TabularMdp grid = make_gridworld(4, 4, 0.95, 0.1);
  OfflineDataset ds = synthesize_dataset(grid, "2p", 30, 20, 42);
  auto dir = temp_dir();
  std::string base = (dir / "rt").string();
  save_dataset(ds, base);
  save_dataset(ds, base + "_again");
  CHECK(slurp(base + ".csv") == slurp(base + "_again.csv"));
  CHECK(slurp(base + ".init") == slurp(base + "_again.init"));
  CHECK(slurp(base + ".meta") == slurp(base + "_again.meta"));

  std::string head = slurp(base + ".csv").substr(0, 18);
  CHECK(head == "s,a,r,s_next,done\n");
  std::string meta = slurp(base + ".meta");
  CHECK(meta.find("mixture=2p") != std::string::npos);
  CHECK(meta.find("component_0_target=40") != std::string::npos);
  CHECK(meta.find("component_1_target=100") != std::string::npos);
  CHECK(meta.find("mdp_hash=") != std::string::npos);

  OfflineDataset back = load_dataset(base);
  CHECK(back.transitions.size() == ds.transitions.size());
  CHECK(back.initial_states == ds.initial_states);
  CHECK(back.mixture_label == ds.mixture_label);
  CHECK(back.seed == ds.seed);
  CHECK(back.mdp_hash == grid.hash());
  REQUIRE(back.components.size() == 2);
  CHECK(back.components[1].achieved_return ==
        doctest::Approx(ds.components[1].achieved_return));
  // Second save of the loaded dataset reproduces the file exactly.
  save_dataset(back, base + "_reload");
  CHECK(slurp(base + ".csv") == slurp(base + "_reload.csv"));
  CHECK(slurp(base + ".meta") == slurp(base + "_reload.meta"));
}

TEST_CASE("empirical tables") {
  TabularMdp grid = make_gridworld(3, 3, 0.9, 0.0);
  OfflineDataset ds = synthesize_dataset(grid, "2p", 40, 15, 5);
  std::vector<double> w = empirical_weights(ds, grid);
  double sum = 0.0;
  for (double x : w) {
    CHECK(x >= 0.0);
    sum += x;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  TabularPolicy pi = empirical_policy(ds, grid);
  pi.validate();
}

TEST_CASE("calibration failure on a degenerate environment") {
  // Single-cell world: every policy scores 100, so the low component target
  // cannot be met... except normalization is degenerate there; use a 1x2
  // corridor where the only non-goal state reaches the goal under every
  // action except staying put, which still slips in eventually with noise 0:
  // all deterministic policies are either optimal or never reach the goal,
  // leaving a gap around the 40-point target.
  TabularMdp tiny = make_gridworld(2, 1, 0.5, 0.0);
  CHECK_THROWS_AS(synthesize_dataset(tiny, "2p", 10, 5, 1), CalibrationFailure);
}

TEST_CASE("done flags mark absorbing-goal rows only") {
  TabularMdp grid = make_gridworld(3, 3, 0.95, 0.0);
  OfflineDataset ds = synthesize_dataset(grid, "2p", 30, 20, 11);
  int goal = grid.n_states - 1;
  for (const Transition& t : ds.transitions) CHECK(t.done == (t.s_next == goal));
}
