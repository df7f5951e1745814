#pragma once

#include <span>
#include <vector>

#include "flexrl/dataset.hpp"
#include "flexrl/divergence.hpp"

namespace flexrl {

/// On-line estimation of the flexible-divergence parameters: a behavior
/// cloning policy, the cosine similarity between its action probabilities and
/// exp(e_hat), EMA smoothing, and the induced alpha_pm / beta values.
/// Before the first estimate the parameters sit at the identity-like
/// defaults (alphas = 1, beta = 1); the clamp makes alpha = 1 unreachable
/// afterwards, so the definitional identities below hold from the first
/// update onward:
///   alpha_+ * clamp(ema_cos) = 1,  alpha_- * (1 - clamp(ema_cos)) = 1,
/// with clamp into [iota_b, 1 - iota_b].
struct AdaptiveState {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> bc_logits;

  double ema_cos = 0.5;
  double ema_e = 0.0;
  double iota_b = 0.3;
  double clip_lo = -0.2;
  double clip_hi = 0.15;
  double ema_decay = 0.99;
  double lr_bc = 1e-2;

  double alpha_plus = 1.0;
  double alpha_minus = 1.0;
  double beta = 1.0;

  bool degenerate_warning = false;  // set when a cosine vector had zero norm
  long n_updates = 0;

  static AdaptiveState make(int n_states, int n_actions);
  /// pi_b(a|s) via row softmax of bc_logits.
  double bc_prob(int s, int a) const;
};

/// One maximum-likelihood (cross-entropy) gradient step on the observed
/// actions. An empty batch leaves the state unchanged.
void bc_update(AdaptiveState& state, std::span<const Transition> batch);

/// Cosine similarity between (pi_b(a_i|s_i))_i and (exp(clip(e_hat_i)))_i;
/// EMA accumulates the raw cosine, the clamp applies when deriving alphas.
/// Zero-norm vectors set degenerate_warning and leave the state unchanged.
void estimate_alphas(AdaptiveState& state, std::span<const Transition> batch,
                     std::span<const double> e_hat);

/// beta = g*'^-1_{alpha_pm, 0}(ema_e) using the current alphas, with samples
/// clipped to [clip_lo, clip_hi] before the mean.
void estimate_beta(AdaptiveState& state, const FlexF& flex, std::span<const double> e_hat);

/// Rebuild the flexible divergence from the current estimates.
FlexF recompose(const AdaptiveState& state, const DivergenceFn& g_minus,
                const DivergenceFn& g_plus);

}  // namespace flexrl
