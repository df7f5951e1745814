#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flexrl/adaptive.hpp"
#include "flexrl/dataset.hpp"
#include "flexrl/divergence.hpp"
#include "flexrl/mdp.hpp"

namespace flexrl {

enum class Algorithm { FlexFQ, FlexFDice };

std::string_view algorithm_name(Algorithm a);
Algorithm algorithm_from_name(std::string_view name);

struct TrainConfig {
  Algorithm algorithm = Algorithm::FlexFQ;
  FlexF flex = preset_iql(0.7);
  bool adaptive = false;
  LpMode lp_mode = LpMode::NegEstimatedTd;
  double alpha_g = 1.0;
  double lr_nu = 1e-2;
  double lr_critic = 1e-2;
  double lr_policy = 1e-2;
  int batch_size = 512;
  long steps = 100000;
  double awr_temperature = 3.0;
  double e_clip_lo = -0.2;
  double e_clip_hi = 0.15;
  bool clip_enabled = true;
  double reward_scale = 1.0;
  std::uint64_t seed = 0;
  long eval_interval = 1000;
  double iota_b = 0.3;
  double ema_decay = 0.99;

  /// Semi-gradient lane (critic Q, L_P = -e_hat), alpha_g = 1.
  static TrainConfig flex_f_q();
  /// DICE lane (critic e_phi, L_P = (1-gamma) p0 nu), alpha_g = 0.1.
  static TrainConfig flex_f_dice();

  void validate() const;  // e_clip within the conjugate domain, rates positive
};

struct TrainState {
  std::vector<double> nu;             // n_states
  std::vector<double> critic;         // n_states * n_actions; Q or e_phi
  std::vector<double> policy_logits;  // n_states * n_actions
  AdaptiveState adaptive;
  FlexF flex = preset_iql(0.7);  // current divergence (recomposed when adaptive)
  long step = 0;
};

TrainState init_train_state(const TabularMdp& mdp, const TrainConfig& config);

struct StepStats {
  double loss_nu = 0.0;
  double loss_critic = 0.0;
  double loss_policy = 0.0;
  double mean_e = 0.0;
};

/// Semi-gradient update: (i) critic toward r + gamma nu(s') with nu fixed,
/// (ii) nu on -e_hat + g(e_hat) with the critic fixed, (iii) AWR policy step
/// with weights exp(min(temperature * e_hat, 20)).
StepStats step_flex_f_q(TrainState& state, const TabularMdp& mdp,
                        std::span<const Transition> batch, const TrainConfig& config);

/// DICE update: (i) nu on the full objective
/// (1-gamma) mean_init nu + alpha_g mean g(e_theta/alpha_g), (ii) critic
/// e_phi toward e_theta by MSE, (iii) AWR with weights relu(zeta_hat).
StepStats step_flex_f_dice(TrainState& state, const TabularMdp& mdp,
                           std::span<const Transition> batch,
                           std::span<const int> init_batch, const TrainConfig& config);

// Batch nu-objective values and analytic gradients with the critic frozen;
// shared by the step functions and the finite-difference checks.
double nu_loss_flex_f_q(const TrainState& state, std::span<const Transition> batch,
                        const TrainConfig& config, std::vector<double>* grad);
double nu_loss_flex_f_dice(const TrainState& state, const TabularMdp& mdp,
                           std::span<const Transition> batch, std::span<const int> init_batch,
                           const TrainConfig& config, std::vector<double>* grad);

struct MetricsRow {
  long step = 0;
  double loss_nu = 0.0;
  double loss_critic = 0.0;
  double loss_policy = 0.0;
  double mean_e = 0.0;
  double alpha_plus = 0.0;
  double alpha_minus = 0.0;
  double beta = 0.0;
  double ret = 0.0;
  double norm_return = 0.0;
};

struct TrainResult {
  TrainState state;
  std::vector<MetricsRow> metrics;
};

/// Runs config.steps steps with batches sampled (with replacement) from the
/// dataset, interleaving the adaptive parameter estimation every step when
/// enabled. Deterministic for a fixed seed. Rewards are scaled by
/// config.reward_scale at load time.
TrainResult train(const TabularMdp& mdp, const OfflineDataset& dataset,
                  const TrainConfig& config);

/// Row softmax of the policy logits, or the one-hot argmax when greedy.
TabularPolicy extract_policy(const TrainState& state, bool greedy = false);

struct EvalResult {
  double mean_return = 0.0;        // Monte-Carlo when n_episodes > 0, exact otherwise
  double normalized_return = 0.0;  // from exact policy evaluation
  double exact_return = 0.0;
};

/// Monte-Carlo rollouts plus exact policy evaluation; normalization anchors
/// are the uniform policy and the value-iteration optimum.
EvalResult evaluate(const TabularMdp& mdp, const TabularPolicy& policy, int n_episodes,
                    int horizon, std::uint64_t seed);

/// Checkpoint text format: a step=N line, then sections [nu], [critic],
/// [policy_logits], [adaptive], each one row per state of space-separated
/// 17-significant-digit reals ([adaptive] starts with one scalar row).
void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path, int n_states, int n_actions);

/// Metrics CSV with the fixed column header.
void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path);
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

}  // namespace flexrl
