#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flexrl/errors.hpp"
#include "flexrl/rng.hpp"

namespace flexrl {

/// Finite MDP with dense transition tensor T[s][a][s'], reward table r[s][a],
/// initial distribution p0 and discount gamma in [0, 1).
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> transition;  // n_states * n_actions * n_states
  std::vector<double> reward;      // n_states * n_actions
  std::vector<double> p0;          // n_states
  double gamma = 0.9;

  double T(int s, int a, int s2) const {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  double& T(int s, int a, int s2) {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  double r(int s, int a) const { return reward[static_cast<std::size_t>(s) * n_actions + a]; }
  double& r(int s, int a) { return reward[static_cast<std::size_t>(s) * n_actions + a]; }
  int sa_count() const { return n_states * n_actions; }

  /// Row sums = 1 +- 1e-12, entries nonnegative, p0 a distribution.
  void validate() const;
  /// FNV-1a over a canonical text serialization; used in dataset .meta files.
  std::uint64_t hash() const;
};

struct TabularPolicy {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> probs;  // n_states * n_actions, rows sum to 1

  double p(int s, int a) const { return probs[static_cast<std::size_t>(s) * n_actions + a]; }
  double& p(int s, int a) { return probs[static_cast<std::size_t>(s) * n_actions + a]; }
  void validate() const;
};

struct OccupancyMeasure {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> d;  // n_states * n_actions, sums to 1

  double at(int s, int a) const { return d[static_cast<std::size_t>(s) * n_actions + a]; }
};

/// (T nu)(s,a) = sum_s' T(s'|s,a) nu(s').
std::vector<double> apply_T(const TabularMdp& mdp, std::span<const double> nu);

/// e_nu(s,a) = r(s,a) + gamma (T nu)(s,a) - nu(s).
std::vector<double> td_error(const TabularMdp& mdp, std::span<const double> nu);

/// Exact policy evaluation: solves (I - gamma P_pi) V = r_pi directly.
std::vector<double> policy_value(const TabularMdp& mdp, const TabularPolicy& policy);

/// Exact discounted occupancy: (I - gamma P_pi^T) d_s = (1-gamma) p0, then
/// d(s,a) = d_s(s) pi(a|s).
OccupancyMeasure exact_occupancy(const TabularMdp& mdp, const TabularPolicy& policy);

/// Performance difference lemma residual:
///   E_p0[V^pi - nu] - 1/(1-gamma) E_{d^pi}[e_nu],
/// which vanishes identically for exact tabular quantities.
double perf_diff_check(const TabularMdp& mdp, const TabularPolicy& dataset_policy,
                       std::span<const double> nu);

/// Four-action gridworld with an absorbing goal at the far corner. The goal
/// self-loop pays (1-gamma) per step, i.e. one unit of discounted reward in
/// total, so V*(s) = gamma^(shortest distance). Slip probability `noise`
/// replaces the intended move by a uniformly random one.
TabularMdp make_gridworld(int width, int height, double gamma, double noise);

/// Random dense MDP (garnet-style) for oracle and property tests.
TabularMdp make_random_mdp(int n_states, int n_actions, std::uint64_t seed,
                           double gamma = 0.9, int branching = 0);

TabularPolicy uniform_policy(const TabularMdp& mdp);
TabularPolicy random_policy(const TabularMdp& mdp, Rng& rng);

/// Deterministic greedy policy w.r.t. one-step lookahead on state values;
/// ties break toward the lowest action index.
TabularPolicy greedy_from_values(const TabularMdp& mdp, std::span<const double> values);

}  // namespace flexrl
