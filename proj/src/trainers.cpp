#include "flexrl/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "flexrl/lp_oracle.hpp"

namespace flexrl {

namespace {

// Conjugate-side term in e_hat units: value alpha_g g(x) and slope zeta at
// x = e/alpha_g, with the configured clip window applied to the raw e_hat and
// a linear continuation outside it so gradients saturate instead of dying.
struct ConjTerm {
  double value;
  double zeta;
};

ConjTerm conj_term(const FlexF& flex, double e, const TrainConfig& cfg) {
  double eb = e;
  if (cfg.clip_enabled) eb = std::min(std::max(e, cfg.e_clip_lo), cfg.e_clip_hi);
  double x = eb / cfg.alpha_g;
  const Interval dom = flex.e_domain();
  if (!dom.interior_contains(x)) {
    if (!cfg.clip_enabled)
      throw DomainError("trainer: e_hat/alpha_g = " + std::to_string(x) +
                        " outside the conjugate domain " + dom.str());
    x = dom.clamp_interior(x, 1e-9);
  }
  double zeta = flex.gstar_prime_inv(x);
  double value = cfg.alpha_g * flex.g(x) + zeta * (e - x * cfg.alpha_g);
  return {value, zeta};
}

double softmax_prob(std::span<const double> logits, int n_actions, int s, int a) {
  const double* row = &logits[static_cast<std::size_t>(s) * n_actions];
  double mx = row[0];
  for (int b = 1; b < n_actions; ++b) mx = std::max(mx, row[b]);
  double denom = 0.0;
  for (int b = 0; b < n_actions; ++b) denom += std::exp(row[b] - mx);
  return std::exp(row[a] - mx) / denom;
}

// AWR ascent on weighted log-likelihood; returns the (negated) objective.
double policy_step(TrainState& state, int n_actions, std::span<const Transition> batch,
                   std::span<const double> weights, double lr) {
  double loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  std::vector<double> grad(state.policy_logits.size(), 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = batch[i];
    double w = weights[i];
    loss -= w * std::log(std::max(softmax_prob(state.policy_logits, n_actions, t.s, t.a),
                                  1e-300)) *
            inv_b;
    for (int b = 0; b < n_actions; ++b) {
      double p = softmax_prob(state.policy_logits, n_actions, t.s, b);
      grad[t.s * n_actions + b] += w * ((b == t.a ? 1.0 : 0.0) - p) * inv_b;
    }
  }
  for (std::size_t i = 0; i < grad.size(); ++i) state.policy_logits[i] += lr * grad[i];
  return loss;
}

void check_finite(const TrainState& state) {
  auto bad = [](const std::vector<double>& v) {
    for (double x : v)
      if (!std::isfinite(x)) return true;
    return false;
  };
  if (bad(state.nu) || bad(state.critic) || bad(state.policy_logits))
    throw NanError("training diverged: non-finite table entry at step " +
                   std::to_string(state.step));
}

void run_adaptive(TrainState& state, std::span<const Transition> batch,
                  std::span<const double> e_hat, const TrainConfig& config) {
  bc_update(state.adaptive, batch);
  estimate_alphas(state.adaptive, batch, e_hat);
  estimate_beta(state.adaptive, state.flex, e_hat);
  state.flex = recompose(state.adaptive, config.flex.g_minus, config.flex.g_plus);
}

}  // namespace

std::string_view algorithm_name(Algorithm a) {
  return a == Algorithm::FlexFQ ? "flex_f_q" : "flex_f_dice";
}

Algorithm algorithm_from_name(std::string_view name) {
  if (name == "flex_f_q" || name == "flex-f-q") return Algorithm::FlexFQ;
  if (name == "flex_f_dice" || name == "flex-f-dice") return Algorithm::FlexFDice;
  throw ConfigError("unknown algorithm: " + std::string(name));
}

TrainConfig TrainConfig::flex_f_q() {
  TrainConfig c;
  c.algorithm = Algorithm::FlexFQ;
  c.lp_mode = LpMode::NegEstimatedTd;
  c.alpha_g = 1.0;
  return c;
}

TrainConfig TrainConfig::flex_f_dice() {
  TrainConfig c;
  c.algorithm = Algorithm::FlexFDice;
  c.lp_mode = LpMode::InitDist;
  c.alpha_g = 0.1;
  c.flex = preset("soft_chi2");
  return c;
}

void TrainConfig::validate() const {
  if (!(alpha_g > 0.0) || !(lr_nu > 0.0) || !(lr_critic > 0.0) || !(lr_policy > 0.0))
    throw ConfigError("TrainConfig: rates and alpha_g must be positive");
  if (batch_size <= 0 || steps < 0 || eval_interval <= 0)
    throw ConfigError("TrainConfig: bad batch_size/steps/eval_interval");
  if (!(e_clip_lo < e_clip_hi)) throw ConfigError("TrainConfig: empty e_clip interval");
  if (!(awr_temperature > 0.0)) throw ConfigError("TrainConfig: awr_temperature must be positive");
  if (!(reward_scale > 0.0)) throw ConfigError("TrainConfig: reward_scale must be positive");
  if (clip_enabled) {
    const Interval dom = flex.e_domain();
    if (!dom.contains(e_clip_lo) || !dom.contains(e_clip_hi))
      throw ConfigError("TrainConfig: e_clip must lie within the conjugate domain " +
                        dom.str());
  }
}

TrainState init_train_state(const TabularMdp& mdp, const TrainConfig& config) {
  TrainState st;
  st.nu.assign(mdp.n_states, 0.0);
  st.critic.assign(mdp.sa_count(), 0.0);
  st.policy_logits.assign(mdp.sa_count(), 0.0);
  st.adaptive = AdaptiveState::make(mdp.n_states, mdp.n_actions);
  st.adaptive.iota_b = config.iota_b;
  st.adaptive.ema_decay = config.ema_decay;
  st.adaptive.clip_lo = config.e_clip_lo;
  st.adaptive.clip_hi = config.e_clip_hi;
  st.flex = config.flex;
  return st;
}

double nu_loss_flex_f_q(const TrainState& state, std::span<const Transition> batch,
                        const TrainConfig& config, std::vector<double>* grad) {
  const int m = state.adaptive.n_actions;
  double loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  if (grad) grad->assign(state.nu.size(), 0.0);
  for (const Transition& t : batch) {
    double e_hat = state.critic[t.s * m + t.a] - state.nu[t.s];
    ConjTerm c = conj_term(state.flex, e_hat, config);
    loss += (-e_hat + c.value) * inv_b;
    if (grad) (*grad)[t.s] += (1.0 - c.zeta) * inv_b;
  }
  return loss;
}

double nu_loss_flex_f_dice(const TrainState& state, const TabularMdp& mdp,
                           std::span<const Transition> batch, std::span<const int> init_batch,
                           const TrainConfig& config, std::vector<double>* grad) {
  double loss = 0.0;
  if (grad) grad->assign(state.nu.size(), 0.0);
  const double inv_b0 = init_batch.empty() ? 0.0 : 1.0 / static_cast<double>(init_batch.size());
  for (int s0 : init_batch) {
    loss += (1.0 - mdp.gamma) * state.nu[s0] * inv_b0;
    if (grad) (*grad)[s0] += (1.0 - mdp.gamma) * inv_b0;
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const Transition& t : batch) {
    double e_theta = t.r + mdp.gamma * state.nu[t.s_next] - state.nu[t.s];
    ConjTerm c = conj_term(state.flex, e_theta, config);
    loss += c.value * inv_b;
    if (grad) {
      (*grad)[t.s_next] += mdp.gamma * c.zeta * inv_b;
      (*grad)[t.s] -= c.zeta * inv_b;
    }
  }
  return loss;
}

StepStats step_flex_f_q(TrainState& state, const TabularMdp& mdp,
                        std::span<const Transition> batch, const TrainConfig& config) {
  const int m = mdp.n_actions;
  StepStats stats;
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  // (i) critic toward the bootstrapped target, nu held fixed.
  {
    std::vector<double> grad(state.critic.size(), 0.0);
    for (const Transition& t : batch) {
      double target = t.r + mdp.gamma * state.nu[t.s_next];
      double diff = state.critic[t.s * m + t.a] - target;
      stats.loss_critic += 0.5 * diff * diff * inv_b;
      grad[t.s * m + t.a] += diff * inv_b;
    }
    for (std::size_t i = 0; i < grad.size(); ++i)
      state.critic[i] -= config.lr_critic * grad[i];
  }

  // (ii) nu on -e_hat + g(e_hat), the critic now fixed.
  {
    std::vector<double> grad;
    stats.loss_nu = nu_loss_flex_f_q(state, batch, config, &grad);
    for (std::size_t s = 0; s < state.nu.size(); ++s) state.nu[s] -= config.lr_nu * grad[s];
  }

  // (iii) AWR policy extraction with exponential advantage weights.
  {
    std::vector<double> weights(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Transition& t = batch[i];
      double e_hat = state.critic[t.s * m + t.a] - state.nu[t.s];
      stats.mean_e += e_hat * inv_b;
      weights[i] = std::exp(std::min(config.awr_temperature * e_hat, 20.0));
    }
    stats.loss_policy = policy_step(state, m, batch, weights, config.lr_policy);

    if (config.adaptive) {
      std::vector<double> e_hat(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i)
        e_hat[i] = state.critic[batch[i].s * m + batch[i].a] - state.nu[batch[i].s];
      run_adaptive(state, batch, e_hat, config);
    }
  }

  ++state.step;
  check_finite(state);
  return stats;
}

StepStats step_flex_f_dice(TrainState& state, const TabularMdp& mdp,
                           std::span<const Transition> batch,
                           std::span<const int> init_batch, const TrainConfig& config) {
  const int m = mdp.n_actions;
  StepStats stats;
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  // (i) full-gradient nu update.
  {
    std::vector<double> grad;
    stats.loss_nu = nu_loss_flex_f_dice(state, mdp, batch, init_batch, config, &grad);
    for (std::size_t s = 0; s < state.nu.size(); ++s) state.nu[s] -= config.lr_nu * grad[s];
  }

  // (ii) e_phi toward the refreshed e_theta by MSE.
  {
    std::vector<double> grad(state.critic.size(), 0.0);
    for (const Transition& t : batch) {
      double e_theta = t.r + mdp.gamma * state.nu[t.s_next] - state.nu[t.s];
      double diff = state.critic[t.s * m + t.a] - e_theta;
      stats.loss_critic += 0.5 * diff * diff * inv_b;
      grad[t.s * m + t.a] += diff * inv_b;
    }
    for (std::size_t i = 0; i < grad.size(); ++i)
      state.critic[i] -= config.lr_critic * grad[i];
  }

  // (iii) AWR with ReLU-wrapped predicted density ratios.
  {
    std::vector<double> weights(batch.size());
    std::vector<double> e_hat(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Transition& t = batch[i];
      e_hat[i] = state.critic[t.s * m + t.a];
      stats.mean_e += e_hat[i] * inv_b;
      weights[i] = std::max(0.0, conj_term(state.flex, e_hat[i], config).zeta);
    }
    stats.loss_policy = policy_step(state, m, batch, weights, config.lr_policy);
    if (config.adaptive) run_adaptive(state, batch, e_hat, config);
  }

  ++state.step;
  check_finite(state);
  return stats;
}

TrainResult train(const TabularMdp& mdp, const OfflineDataset& dataset,
                  const TrainConfig& config) {
  mdp.validate();
  config.validate();
  if (dataset.transitions.empty()) throw ConfigError("train: empty dataset");
  if (dataset.initial_states.empty()) throw ConfigError("train: empty initial-state set");

  std::vector<Transition> data = dataset.transitions;
  for (Transition& t : data) t.r *= config.reward_scale;

  TrainResult out;
  out.state = init_train_state(mdp, config);
  if (config.steps == 0) return out;

  ReturnAnchors anchors = return_anchors(mdp);
  Rng rng(config.seed);
  std::vector<Transition> batch(config.batch_size);
  std::vector<int> init_batch(config.batch_size);

  StepStats stats;
  for (long step = 0; step < config.steps; ++step) {
    for (int i = 0; i < config.batch_size; ++i)
      batch[i] = data[rng.uniform_int(data.size())];
    if (config.algorithm == Algorithm::FlexFQ) {
      stats = step_flex_f_q(out.state, mdp, batch, config);
    } else {
      for (int i = 0; i < config.batch_size; ++i)
        init_batch[i] = dataset.initial_states[rng.uniform_int(dataset.initial_states.size())];
      stats = step_flex_f_dice(out.state, mdp, batch, init_batch, config);
    }

    if ((step + 1) % config.eval_interval == 0 || step + 1 == config.steps) {
      EvalResult ev = evaluate(mdp, extract_policy(out.state, /*greedy=*/true), 0, 0, 0);
      MetricsRow row;
      row.step = step + 1;
      row.loss_nu = stats.loss_nu;
      row.loss_critic = stats.loss_critic;
      row.loss_policy = stats.loss_policy;
      row.mean_e = stats.mean_e;
      if (config.adaptive) {
        row.alpha_plus = out.state.adaptive.alpha_plus;
        row.alpha_minus = out.state.adaptive.alpha_minus;
        row.beta = out.state.adaptive.beta;
      } else {
        row.alpha_plus = config.flex.alpha_plus;
        row.alpha_minus = config.flex.alpha_minus;
        row.beta = config.flex.beta;
      }
      row.ret = ev.exact_return;
      row.norm_return = normalized_return(anchors, ev.exact_return);
      out.metrics.push_back(row);
    }
  }
  return out;
}

TabularPolicy extract_policy(const TrainState& state, bool greedy) {
  const int n = state.adaptive.n_states, m = state.adaptive.n_actions;
  TabularPolicy pi;
  pi.n_states = n;
  pi.n_actions = m;
  pi.probs.assign(static_cast<std::size_t>(n) * m, 0.0);
  for (int s = 0; s < n; ++s) {
    if (greedy) {
      int best = 0;
      for (int b = 1; b < m; ++b)
        if (state.policy_logits[s * m + b] > state.policy_logits[s * m + best]) best = b;
      pi.p(s, best) = 1.0;
    } else {
      for (int b = 0; b < m; ++b) pi.p(s, b) = softmax_prob(state.policy_logits, m, s, b);
    }
  }
  return pi;
}

EvalResult evaluate(const TabularMdp& mdp, const TabularPolicy& policy, int n_episodes,
                    int horizon, std::uint64_t seed) {
  policy.validate();
  EvalResult out;
  ReturnAnchors anchors = return_anchors(mdp);
  out.exact_return = expected_return(mdp, policy);
  out.normalized_return = normalized_return(anchors, out.exact_return);
  if (n_episodes <= 0) {
    out.mean_return = out.exact_return;
    return out;
  }
  Rng rng(seed);
  double total = 0.0;
  for (int ep = 0; ep < n_episodes; ++ep) {
    int s = static_cast<int>(rng.categorical(mdp.p0));
    double discount = 1.0, ret = 0.0;
    for (int t = 0; t < horizon; ++t) {
      std::span<const double> pol_row(&policy.probs[static_cast<std::size_t>(s) * mdp.n_actions],
                                      static_cast<std::size_t>(mdp.n_actions));
      int a = static_cast<int>(rng.categorical(pol_row));
      ret += discount * mdp.r(s, a);
      discount *= mdp.gamma;
      std::span<const double> row(
          &mdp.transition[(static_cast<std::size_t>(s) * mdp.n_actions + a) * mdp.n_states],
          static_cast<std::size_t>(mdp.n_states));
      s = static_cast<int>(rng.categorical(row));
    }
    total += ret;
  }
  out.mean_return = total / n_episodes;
  return out;
}

namespace {

void write_table(std::ofstream& out, const char* name, const std::vector<double>& table,
                 int n_rows, int row_len) {
  out << '[' << name << "]\n";
  char buf[40];
  for (int s = 0; s < n_rows; ++s) {
    for (int j = 0; j < row_len; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", table[static_cast<std::size_t>(s) * row_len + j]);
      out << (j ? " " : "") << buf;
    }
    out << '\n';
  }
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_checkpoint: cannot write " + path);
  const int n = state.adaptive.n_states, m = state.adaptive.n_actions;
  out << "step=" << state.step << '\n';
  write_table(out, "nu", state.nu, n, 1);
  write_table(out, "critic", state.critic, n, m);
  write_table(out, "policy_logits", state.policy_logits, n, m);
  out << "[adaptive]\n";
  char buf[48];
  const AdaptiveState& ad = state.adaptive;
  const double scalars[] = {ad.ema_cos, ad.ema_e,      ad.iota_b,     ad.clip_lo,
                            ad.clip_hi, ad.ema_decay,  ad.alpha_plus, ad.alpha_minus,
                            ad.beta,    static_cast<double>(ad.n_updates)};
  for (int i = 0; i < 10; ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", scalars[i]);
    out << (i ? " " : "") << buf;
  }
  out << '\n';
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < m; ++a) {
      std::snprintf(buf, sizeof buf, "%.17g", ad.bc_logits[static_cast<std::size_t>(s) * m + a]);
      out << (a ? " " : "") << buf;
    }
    out << '\n';
  }
}

TrainState load_checkpoint(const std::string& path, int n_states, int n_actions) {
  std::ifstream in(path);
  if (!in) throw IoError("load_checkpoint: cannot open " + path);
  TrainState st;
  st.adaptive = AdaptiveState::make(n_states, n_actions);
  std::string line;
  if (!std::getline(in, line) || line.rfind("step=", 0) != 0)
    throw IoError("load_checkpoint: missing step header");
  st.step = std::stol(line.substr(5));

  auto read_table = [&](const char* name, std::vector<double>& table, int rows, int cols) {
    if (!std::getline(in, line) || line != std::string("[") + name + "]")
      throw IoError(std::string("load_checkpoint: expected [") + name + "]");
    table.resize(static_cast<std::size_t>(rows) * cols);
    for (int s = 0; s < rows; ++s) {
      if (!std::getline(in, line)) throw IoError("load_checkpoint: truncated table");
      std::istringstream ss(line);
      for (int j = 0; j < cols; ++j)
        if (!(ss >> table[static_cast<std::size_t>(s) * cols + j]))
          throw IoError("load_checkpoint: short row");
    }
  };
  read_table("nu", st.nu, n_states, 1);
  read_table("critic", st.critic, n_states, n_actions);
  read_table("policy_logits", st.policy_logits, n_states, n_actions);

  if (!std::getline(in, line) || line != "[adaptive]")
    throw IoError("load_checkpoint: expected [adaptive]");
  {
    if (!std::getline(in, line)) throw IoError("load_checkpoint: missing adaptive scalars");
    std::istringstream ss(line);
    AdaptiveState& ad = st.adaptive;
    double n_updates = 0.0;
    if (!(ss >> ad.ema_cos >> ad.ema_e >> ad.iota_b >> ad.clip_lo >> ad.clip_hi >>
          ad.ema_decay >> ad.alpha_plus >> ad.alpha_minus >> ad.beta >> n_updates))
      throw IoError("load_checkpoint: bad adaptive scalars");
    ad.n_updates = static_cast<long>(n_updates);
    for (int s = 0; s < n_states; ++s) {
      if (!std::getline(in, line)) throw IoError("load_checkpoint: truncated bc table");
      std::istringstream rs(line);
      for (int a = 0; a < n_actions; ++a)
        if (!(rs >> ad.bc_logits[static_cast<std::size_t>(s) * n_actions + a]))
          throw IoError("load_checkpoint: short bc row");
    }
  }
  return st;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_metrics_csv: cannot write " + path);
  out << "step,loss_nu,loss_critic,loss_policy,mean_e,alpha_plus,alpha_minus,beta,return,"
         "norm_return\n";
  char buf[400];
  for (const MetricsRow& r : rows) {
    std::snprintf(buf, sizeof buf,
                  "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", r.step,
                  r.loss_nu, r.loss_critic, r.loss_policy, r.mean_e, r.alpha_plus,
                  r.alpha_minus, r.beta, r.ret, r.norm_return);
    out << buf << '\n';
  }
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_metrics_csv: cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MetricsRow r;
    if (std::sscanf(line.c_str(), "%ld,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &r.step,
                    &r.loss_nu, &r.loss_critic, &r.loss_policy, &r.mean_e, &r.alpha_plus,
                    &r.alpha_minus, &r.beta, &r.ret, &r.norm_return) != 10)
      throw IoError("read_metrics_csv: bad row: " + line);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace flexrl
