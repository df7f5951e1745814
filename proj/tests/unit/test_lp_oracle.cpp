#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "flexrl/lp_oracle.hpp"
#include "support/oracles.hpp"

using namespace flexrl;

namespace {

// Full-coverage synthetic weights: randomized positive counts, normalized.
std::vector<double> random_full_weights(const TabularMdp& mdp, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(mdp.sa_count());
  double sum = 0.0;
  for (double& x : w) {
    x = rng.uniform(0.2, 1.0);
    sum += x;
  }
  for (double& x : w) x /= sum;
  return w;
}

TabularMdp one_state_mdp(double r0, double r1, double gamma) {
  TabularMdp mdp;
  mdp.n_states = 1;
  mdp.n_actions = 2;
  mdp.gamma = gamma;
  mdp.transition = {1.0, 1.0};
  mdp.reward = {r0, r1};
  mdp.p0 = {1.0};
  mdp.validate();
  return mdp;
}

}  // namespace

TEST_CASE("value_iteration: geometric loop and deterministic grid") {
  TabularMdp loop = one_state_mdp(1.0, 1.0, 0.9);
  CHECK(value_iteration(loop, 1e-10)[0] == doctest::Approx(10.0).epsilon(1e-9));

  TabularMdp grid = make_gridworld(4, 4, 0.95, 0.0);
  std::vector<double> v = value_iteration(grid, 1e-12);
  CHECK(v[0] == doctest::Approx(std::pow(0.95, 6)).epsilon(1e-10));
  CHECK_THROWS_AS(value_iteration(grid, 0.0), ConfigError);
}

TEST_CASE("occupancy_residual: exact ratio, zero zeta, behavior ratio one") {
  TabularMdp mdp = make_random_mdp(4, 2, 31, 0.85);
  Rng rng(4);
  TabularPolicy pi = random_policy(mdp, rng);
  OccupancyMeasure occ = exact_occupancy(mdp, pi);

  // w = d^pi and zeta = 1: the flow holds exactly.
  std::vector<double> ones(mdp.sa_count(), 1.0);
  auto resid = occupancy_residual(mdp, occ.d, ones, LpMode::InitDist);
  for (double x : resid) CHECK(std::fabs(x) <= 1e-8);

  // zeta = 0 leaves -alpha(s).
  std::vector<double> zeros(mdp.sa_count(), 0.0);
  auto r0 = occupancy_residual(mdp, occ.d, zeros, LpMode::InitDist);
  for (int s = 0; s < mdp.n_states; ++s)
    CHECK(r0[s] == doctest::Approx(-(1.0 - mdp.gamma) * mdp.p0[s]).epsilon(1e-12));

  // zeta = d^pi / w for an unrelated weighting is feasible too.
  std::vector<double> w = random_full_weights(mdp, 77);
  std::vector<double> zeta(mdp.sa_count());
  for (int i = 0; i < mdp.sa_count(); ++i) zeta[i] = occ.d[i] / w[i];
  auto r1 = occupancy_residual(mdp, w, zeta, LpMode::InitDist);
  for (double x : r1) CHECK(std::fabs(x) <= 1e-8);

  CHECK_THROWS_AS(occupancy_residual(mdp, w, std::vector<double>{1.0}, LpMode::InitDist),
                  ShapeError);
}

TEST_CASE("solve_regularized_nu: single-state problem matches a 1-D scalar oracle") {
  TabularMdp mdp = one_state_mdp(0.7, 0.2, 0.9);
  std::vector<double> w = {0.6, 0.4};
  for (double alpha_g : {0.1, 1.0}) {
    CAPTURE(alpha_g);
    FlexF chi2 = FlexF::from_base(DivergenceFn::chi2());
    LpSolution sol = solve_regularized_nu(mdp, w, chi2, LpMode::InitDist, alpha_g);

    auto objective = [&](double nu) {
      double obj = (1.0 - mdp.gamma) * nu;
      for (int a = 0; a < 2; ++a) {
        double e = mdp.r(0, a) + mdp.gamma * nu - nu;
        obj += w[a] * alpha_g * chi2.g(e / alpha_g);
      }
      return obj;
    };
    double nu_oracle = test::golden_min(objective, -50.0, 50.0, 1e-13);
    CHECK(sol.nu_star[0] == doctest::Approx(nu_oracle).epsilon(1e-6));
    CHECK(sol.primal_objective == doctest::Approx(objective(nu_oracle)).epsilon(1e-10));

    // Optimality rule: zeta* = g*'^-1(e/alpha_g) elementwise.
    for (int a = 0; a < 2; ++a) {
      double e = mdp.r(0, a) - (1.0 - mdp.gamma) * sol.nu_star[0];
      CHECK(sol.zeta_star[a] ==
            doctest::Approx(chi2.gstar_prime_inv(e / alpha_g)).epsilon(1e-6));
    }
  }
}

TEST_CASE("solve_regularized_nu: stationarity means the weighted flow balances") {
  TabularMdp mdp = make_random_mdp(5, 3, 8, 0.9);
  std::vector<double> w = random_full_weights(mdp, 8);
  FlexF kl = FlexF::from_base(DivergenceFn::kl());
  LpSolution sol = solve_regularized_nu(mdp, w, kl, LpMode::InitDist, 0.5);
  // The gradient of the nu objective equals minus the occupancy residual of
  // the optimality-rule zeta; both must vanish at the optimum.
  auto resid = occupancy_residual(mdp, w, sol.zeta_star, LpMode::InitDist);
  for (double x : resid) CHECK(std::fabs(x) <= 1e-6);
}

TEST_CASE("solve_regularized_nu: heavy global weighting pins nu to the behavior value") {
  TabularMdp grid = make_gridworld(3, 3, 0.9, 0.1);
  // Behavior: epsilon-greedy around the optimum; weights are its exact
  // occupancy, so the dataset is self-consistent and fully covering.
  std::vector<double> vstar = value_iteration(grid, 1e-12);
  TabularPolicy greedy = greedy_from_values(grid, vstar);
  TabularPolicy behavior = greedy;
  for (int s = 0; s < grid.n_states; ++s)
    for (int a = 0; a < grid.n_actions; ++a)
      behavior.p(s, a) = 0.98 * greedy.p(s, a) + 0.02 / grid.n_actions;
  OccupancyMeasure occ = exact_occupancy(grid, behavior);

  FlexF chi2 = FlexF::from_base(DivergenceFn::chi2());
  LpSolution sol = solve_regularized_nu(grid, occ.d, chi2, LpMode::InitDist, 100.0);
  std::vector<double> vbeh = policy_value(grid, behavior);
  for (int s = 0; s < grid.n_states; ++s)
    CHECK(sol.nu_star[s] == doctest::Approx(vbeh[s]).epsilon(0.0).scale(1.0).epsilon(1e-2));
}

TEST_CASE("solve_regularized_nu: expert-only dataset improvement bound") {
  TabularMdp grid = make_gridworld(3, 3, 0.9, 0.0);
  std::vector<double> vstar = value_iteration(grid, 1e-12);
  TabularPolicy expert = greedy_from_values(grid, vstar);
  OccupancyMeasure occ = exact_occupancy(grid, expert);
  // Restrict to the support (deterministic expert: one action per state).
  FlexF chi2 = FlexF::from_base(DivergenceFn::chi2());
  LpSolution sol = solve_regularized_nu(grid, occ.d, chi2, LpMode::InitDist, 0.1);
  double behavior_return = 0.0;
  for (int s = 0; s < grid.n_states; ++s)
    for (int a = 0; a < grid.n_actions; ++a)
      behavior_return += occ.at(s, a) * grid.r(s, a);
  CHECK(sol.dual_objective >= behavior_return - 1e-3);
}

TEST_CASE("solve_regularized_dual: single absorbing state forces zeta = 1") {
  TabularMdp mdp = one_state_mdp(0.4, 0.4, 0.9);
  // One action only, to make the flow square.
  mdp.n_actions = 1;
  mdp.transition = {1.0};
  mdp.reward = {0.4};
  mdp.validate();
  std::vector<double> w = {1.0};
  FlexF chi2 = FlexF::from_base(DivergenceFn::chi2());
  LpSolution sol = solve_regularized_dual(mdp, w, chi2, 0.5);
  CHECK(sol.zeta_star[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(sol.dual_objective == doctest::Approx(0.4).epsilon(1e-7));
}

TEST_CASE("solve_regularized_dual: zero rewards keep the objective nonpositive") {
  TabularMdp mdp = make_random_mdp(4, 2, 55, 0.8);
  for (double& r : mdp.reward) r = 0.0;
  std::vector<double> w = random_full_weights(mdp, 55);
  for (const auto& base : {DivergenceFn::chi2(), DivergenceFn::kl()}) {
    LpSolution sol = solve_regularized_dual(mdp, w, FlexF::from_base(base), 0.5);
    CHECK(sol.dual_objective <= 1e-9);
  }
}

TEST_CASE("strong duality on small instances, several divergences and weights") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    TabularMdp mdp = make_random_mdp(3 + static_cast<int>(seed), 2, 900 + seed, 0.85);
    std::vector<double> w = random_full_weights(mdp, 900 + seed);
    for (const auto& base : {DivergenceFn::chi2(), DivergenceFn::kl()}) {
      for (double alpha_g : {0.1, 1.0}) {
        CAPTURE(seed);
        CAPTURE(base.name());
        CAPTURE(alpha_g);
        LpSolution rep = duality_gap_report(mdp, w, FlexF::from_base(base), alpha_g);
        CHECK(rep.duality_gap <= 1e-5);
      }
    }
  }
  // Scalar case: the gap collapses to solver precision.
  TabularMdp tiny = one_state_mdp(0.3, 0.3, 0.9);
  tiny.n_actions = 1;
  tiny.transition = {1.0};
  tiny.reward = {0.3};
  tiny.validate();
  SolveOptions tight;
  tight.grad_tol = 1e-13;
  tight.flow_tol = 1e-12;
  LpSolution rep = duality_gap_report(tiny, std::vector<double>{1.0},
                                      FlexF::from_base(DivergenceFn::chi2()), 1.0,
                                      LpMode::InitDist, tight);
  CHECK(rep.duality_gap <= 1e-10);
}

TEST_CASE("strong duality with a composed flexible divergence") {
  TabularMdp mdp = make_random_mdp(4, 2, 77, 0.8);
  std::vector<double> w = random_full_weights(mdp, 77);
  FlexF flex = compose_flex(DivergenceFn::kl(), DivergenceFn::chi2(), 1.3, 0.8, 1.2);
  LpSolution rep = duality_gap_report(mdp, w, flex, 0.5);
  CHECK(rep.duality_gap <= 1e-5);
}

TEST_CASE("reward term is monotone nonincreasing in alpha_g") {
  TabularMdp mdp = make_random_mdp(4, 2, 13, 0.85);
  std::vector<double> w = random_full_weights(mdp, 13);
  FlexF chi2 = FlexF::from_base(DivergenceFn::chi2());
  double prev = 1e300;
  for (double alpha_g : {0.05, 0.2, 1.0, 5.0}) {
    LpSolution sol = solve_regularized_dual(mdp, w, chi2, alpha_g);
    double reward_term = 0.0;
    for (int s = 0; s < mdp.n_states; ++s)
      for (int a = 0; a < mdp.n_actions; ++a)
        reward_term += w[s * mdp.n_actions + a] * sol.zeta_star[s * mdp.n_actions + a] *
                       mdp.r(s, a);
    CHECK(reward_term <= prev + 1e-7);
    prev = reward_term;
  }
}

TEST_CASE("optimal-dataset case: nu matches V* on the support") {
  TabularMdp grid = make_gridworld(3, 3, 0.9, 0.0);
  std::vector<double> vstar = value_iteration(grid, 1e-12);
  TabularPolicy expert = greedy_from_values(grid, vstar);
  OccupancyMeasure occ = exact_occupancy(grid, expert);
  LpSolution rep =
      duality_gap_report(grid, occ.d, FlexF::from_base(DivergenceFn::chi2()), 0.5);
  CHECK(rep.duality_gap <= 1e-5);
  for (int s = 0; s < grid.n_states; ++s) {
    bool covered = false;
    for (int a = 0; a < grid.n_actions; ++a)
      if (occ.at(s, a) > 0.0) covered = true;
    if (covered) CHECK(rep.nu_star[s] == doctest::Approx(vstar[s]).epsilon(1e-4));
  }
}

TEST_CASE("error paths: coverage, domain blowup, size limit") {
  TabularMdp mdp = make_random_mdp(4, 2, 3, 0.9);
  std::vector<double> w(mdp.sa_count(), 0.0);
  w[0] = 1.0;  // only state 0 covered; others reachable
  CHECK_THROWS_AS(
      solve_regularized_nu(mdp, w, FlexF::from_base(DivergenceFn::chi2()), LpMode::InitDist, 1.0),
      CoverageError);

  // reverse_kl conjugate domain is e < 1; large rewards push e/alpha_g out.
  TabularMdp hot = make_random_mdp(3, 2, 4, 0.9);
  for (double& r : hot.reward) r = 5.0;
  std::vector<double> wf = random_full_weights(hot, 4);
  CHECK_THROWS_AS(solve_regularized_nu(hot, wf, FlexF::from_base(DivergenceFn::reverse_kl()),
                                       LpMode::InitDist, 0.1),
                  DomainBlowup);
  // With clipping requested the solve proceeds.
  SolveOptions clip;
  clip.clip_to_domain = true;
  LpSolution sol = solve_regularized_nu(hot, wf, FlexF::from_base(DivergenceFn::reverse_kl()),
                                        LpMode::InitDist, 0.1, clip);
  CHECK(std::isfinite(sol.primal_objective));

  TabularMdp big = make_random_mdp(20, 14, 5, 0.9);
  CHECK_THROWS_AS(solve_regularized_dual(big, random_full_weights(big, 5),
                                         FlexF::from_base(DivergenceFn::chi2()), 1.0),
                  SizeError);
}

TEST_CASE("uniform_value and folded negative-TD modes also satisfy duality") {
  TabularMdp mdp = make_random_mdp(3, 2, 41, 0.8);
  std::vector<double> w = random_full_weights(mdp, 41);
  FlexF chi2 = FlexF::from_base(DivergenceFn::chi2());
  LpSolution u = duality_gap_report(mdp, w, chi2, 1.0, LpMode::UniformValue);
  CHECK(u.duality_gap <= 1e-5);
  LpSolution n = duality_gap_report(mdp, w, chi2, 1.0, LpMode::NegTdError);
  CHECK(n.duality_gap <= 1e-5);
}

TEST_CASE("oracle report file") {
  auto dir = std::filesystem::temp_directory_path() / "flexrl_test_oracle";
  std::filesystem::create_directories(dir);
  std::string path = (dir / "oracle_report.csv").string();
  write_oracle_report({{"inst0", "chi2", 0.1, 1.0, 1.0, 0.0, 12}}, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "instance,divergence,alpha_g,primal,dual,gap,iterations");
  std::getline(in, line);
  CHECK(line.substr(0, 11) == "inst0,chi2,");
}
