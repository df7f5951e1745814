#include "flexrl/adaptive.hpp"

#include <algorithm>
#include <cmath>

namespace flexrl {

namespace {

double clipped(const AdaptiveState& st, double e) {
  return std::min(std::max(e, st.clip_lo), st.clip_hi);
}

}  // namespace

AdaptiveState AdaptiveState::make(int n_states, int n_actions) {
  AdaptiveState st;
  st.n_states = n_states;
  st.n_actions = n_actions;
  st.bc_logits.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
  return st;
}

double AdaptiveState::bc_prob(int s, int a) const {
  const double* row = &bc_logits[static_cast<std::size_t>(s) * n_actions];
  double mx = row[0];
  for (int b = 1; b < n_actions; ++b) mx = std::max(mx, row[b]);
  double denom = 0.0;
  for (int b = 0; b < n_actions; ++b) denom += std::exp(row[b] - mx);
  return std::exp(row[a] - mx) / denom;
}

void bc_update(AdaptiveState& state, std::span<const Transition> batch) {
  if (batch.empty()) return;
  const int m = state.n_actions;
  std::vector<double> grad(state.bc_logits.size(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const Transition& t : batch) {
    for (int b = 0; b < m; ++b)
      grad[t.s * m + b] += inv_b * ((b == t.a ? 1.0 : 0.0) - state.bc_prob(t.s, b));
  }
  for (std::size_t i = 0; i < grad.size(); ++i) state.bc_logits[i] += state.lr_bc * grad[i];
}

void estimate_alphas(AdaptiveState& state, std::span<const Transition> batch,
                     std::span<const double> e_hat) {
  if (batch.size() != e_hat.size())
    throw ShapeError("estimate_alphas: batch and e_hat must align");
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    double u = state.bc_prob(batch[i].s, batch[i].a);
    double v = std::exp(clipped(state, e_hat[i]));
    uv += u * v;
    uu += u * u;
    vv += v * v;
  }
  if (uu <= 0.0 || vv <= 0.0) {
    state.degenerate_warning = true;
    return;
  }
  double cos = uv / (std::sqrt(uu) * std::sqrt(vv));
  state.ema_cos = state.ema_decay * state.ema_cos + (1.0 - state.ema_decay) * cos;
  double c = std::min(std::max(state.ema_cos, state.iota_b), 1.0 - state.iota_b);
  state.alpha_plus = 1.0 / c;
  state.alpha_minus = 1.0 / (1.0 - c);
  ++state.n_updates;
}

void estimate_beta(AdaptiveState& state, const FlexF& flex, std::span<const double> e_hat) {
  if (e_hat.empty()) throw ShapeError("estimate_beta: e_hat must be nonempty");
  double mean = 0.0;
  for (double e : e_hat) mean += clipped(state, e);
  mean /= static_cast<double>(e_hat.size());
  state.ema_e = state.ema_decay * state.ema_e + (1.0 - state.ema_decay) * mean;
  double beta = beta_from_zero_threshold(flex.g_minus, flex.g_plus, state.alpha_minus,
                                         state.alpha_plus, state.ema_e);
  if (!flex.g_minus.zeta_domain().interior_contains(beta) ||
      !flex.g_plus.zeta_domain().interior_contains(beta) || !(beta > 0.0))
    throw DomainError("estimate_beta: estimated beta " + std::to_string(beta) +
                      " outside the branch domains");
  state.beta = beta;
}

FlexF recompose(const AdaptiveState& state, const DivergenceFn& g_minus,
                const DivergenceFn& g_plus) {
  return compose_flex(g_minus, g_plus, state.alpha_minus, state.alpha_plus, state.beta);
}

}  // namespace flexrl
