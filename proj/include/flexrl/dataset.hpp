#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flexrl/mdp.hpp"

namespace flexrl {

struct Transition {
  int s = 0;
  int a = 0;
  double r = 0.0;
  int s_next = 0;
  bool done = false;
};

/// Provenance of one behavior-mixture component.
struct ComponentInfo {
  double target_return = 0.0;    // normalized target
  double achieved_return = 0.0;  // exact normalized return of the policy
  long checkpoint_index = 0;     // value-iteration checkpoint it came from
  int n_trajectories = 0;
};

/// Static dataset: transition records plus the initial-state set D0 with
/// provenance of the generating behavior mixture.
struct OfflineDataset {
  std::vector<Transition> transitions;
  std::vector<int> initial_states;
  std::string mixture_label = "custom";
  std::uint64_t seed = 0;
  int n_trajectories = 0;
  int horizon = 0;
  std::uint64_t mdp_hash = 0;
  std::vector<ComponentInfo> components;
};

/// Roll out deterministic greedy policies taken from asynchronous
/// value-iteration checkpoints, calibrated so each component's normalized
/// return lands within 10 points of its mixture target
/// (2p: {40, 100}; 4p: {10, 30, 60, 100}; 10p: {9, 18, ..., 90}).
/// Pure function of its arguments; throws CalibrationFailure when no
/// checkpoint is close enough to a target.
OfflineDataset synthesize_dataset(const TabularMdp& mdp, const std::string& mixture,
                                  int n_trajectories, int horizon, std::uint64_t seed);

/// Every transition must have positive model probability.
void check_environment_consistency(const OfflineDataset& ds, const TabularMdp& mdp);

/// Empirical d^D over state-action pairs (counts normalized to sum 1).
std::vector<double> empirical_weights(const OfflineDataset& ds, const TabularMdp& mdp);

/// Per-state empirical action distribution; unseen states get uniform rows.
TabularPolicy empirical_policy(const OfflineDataset& ds, const TabularMdp& mdp);

/// File layout: <base>.csv (header s,a,r,s_next,done), <base>.init (one
/// initial-state id per line), <base>.meta (flat key=value text).
void save_dataset(const OfflineDataset& ds, const std::string& base_path);
OfflineDataset load_dataset(const std::string& base_path);

}  // namespace flexrl
