#include "flexrl/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "flexrl/checks.hpp"
#include "flexrl/dataset.hpp"
#include "flexrl/io.hpp"
#include "flexrl/lp_oracle.hpp"
#include "flexrl/plot.hpp"
#include "flexrl/trainers.hpp"

namespace flexrl::cli {

namespace {

namespace fs = std::filesystem;

TabularMdp make_env(const std::string& name, double gamma, double noise) {
  if (name.rfind("grid", 0) == 0) {
    std::string dims = name.substr(4);
    int w = 0, h = 0;
    auto x = dims.find('x');
    if (x == std::string::npos) {
      w = h = std::stoi(dims);
    } else {
      w = std::stoi(dims.substr(0, x));
      h = std::stoi(dims.substr(x + 1));
    }
    return make_gridworld(w, h, gamma, noise);
  }
  throw ConfigError("unknown env: " + name + " (expected gridN or gridWxH)");
}

struct FlexFlags {
  std::string preset_spec;
  std::string g_minus = "le_cam";
  std::string g_plus = "chi2";
  double alpha_minus = 1.0;
  double alpha_plus = 1.0;
  double beta = 1.0;

  FlexF build() const {
    if (!preset_spec.empty()) return preset_from_spec(preset_spec);
    return compose_flex(DivergenceFn::from_name(g_minus), DivergenceFn::from_name(g_plus),
                        alpha_minus, alpha_plus, beta);
  }
  std::string describe(bool adaptive) const {
    std::string base;
    if (!preset_spec.empty()) {
      base = preset_spec;
    } else {
      std::ostringstream os;
      os << "flex(" << g_minus << ';' << g_plus << ';' << alpha_minus << ';' << alpha_plus
         << ';' << beta << ')';
      base = os.str();
    }
    return adaptive ? base + "+adaptive" : base;
  }
};

void add_flex_flags(CLI::App* cmd, FlexFlags& ff) {
  cmd->add_option("--preset", ff.preset_spec,
                  "named divergence: soft_chi2, relax_dice, xql, iql(tau), porel_dice(eps)");
  cmd->add_option("--g-minus", ff.g_minus, "base generator below beta");
  cmd->add_option("--g-plus", ff.g_plus, "base generator at or above beta");
  cmd->add_option("--alpha-minus", ff.alpha_minus, "scale of the minus branch");
  cmd->add_option("--alpha-plus", ff.alpha_plus, "scale of the plus branch");
  cmd->add_option("--beta", ff.beta, "join threshold in ratio space");
}

struct EnvFlags {
  std::string env = "grid4";
  double gamma = 0.95;
  double noise = 0.1;
};

void add_env_flags(CLI::App* cmd, EnvFlags& ef) {
  cmd->add_option("--env", ef.env, "environment name (gridN or gridWxH)");
  cmd->add_option("--gamma", ef.gamma, "discount factor");
  cmd->add_option("--noise", ef.noise, "action slip probability");
}

int cmd_gen_data(const EnvFlags& ef, const std::string& mixture, int n_traj, int horizon,
                 std::uint64_t seed, const std::string& out_dir, std::string name) {
  TabularMdp mdp = make_env(ef.env, ef.gamma, ef.noise);
  OfflineDataset ds = synthesize_dataset(mdp, mixture, n_traj, horizon, seed);
  fs::create_directories(out_dir);
  if (name.empty()) name = ef.env + "_" + mixture + "_s" + std::to_string(seed);
  std::string base = (fs::path(out_dir) / name).string();
  save_dataset(ds, base);
  std::cout << "wrote " << base << ".csv (" << ds.transitions.size() << " transitions), .init, .meta\n";
  for (std::size_t i = 0; i < ds.components.size(); ++i)
    std::cout << "  component " << i << ": target " << ds.components[i].target_return
              << " achieved " << ds.components[i].achieved_return << "\n";
  return 0;
}

bool parse_on_off(const std::string& v, const char* flag) {
  if (v.empty() || v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError(std::string(flag) + ": expected on or off, got '" + v + "'");
}

struct TrainFlags {
  EnvFlags env;
  FlexFlags flex;
  std::string data;
  std::string algorithm = "flex-f-q";
  bool adaptive = false;
  int seeds = 1;
  std::uint64_t seed0 = 0;
  std::string out_dir = ".";
  std::string name;
  bool overwrite = false;
  TrainConfig cfg = TrainConfig::flex_f_q();
  bool alpha_g_set = false;
  bool lp_mode_set = false;
  std::string lp_mode_name;
};

int cmd_train(TrainFlags& tf) {
  TabularMdp mdp = make_env(tf.env.env, tf.env.gamma, tf.env.noise);
  OfflineDataset ds = load_dataset(tf.data);
  if (ds.mdp_hash != 0 && ds.mdp_hash != mdp.hash())
    throw ConfigError("dataset " + tf.data + " was generated for a different environment");
  check_environment_consistency(ds, mdp);

  Algorithm alg = algorithm_from_name(tf.algorithm);
  TrainConfig base = alg == Algorithm::FlexFQ ? TrainConfig::flex_f_q()
                                              : TrainConfig::flex_f_dice();
  base.flex = tf.flex.build();
  base.adaptive = tf.adaptive;
  base.steps = tf.cfg.steps;
  base.batch_size = tf.cfg.batch_size;
  base.lr_nu = tf.cfg.lr_nu;
  base.lr_critic = tf.cfg.lr_critic;
  base.lr_policy = tf.cfg.lr_policy;
  base.awr_temperature = tf.cfg.awr_temperature;
  base.e_clip_lo = tf.cfg.e_clip_lo;
  base.e_clip_hi = tf.cfg.e_clip_hi;
  base.reward_scale = tf.cfg.reward_scale;
  base.eval_interval = tf.cfg.eval_interval;
  base.iota_b = tf.cfg.iota_b;
  base.ema_decay = tf.cfg.ema_decay;
  if (tf.alpha_g_set) base.alpha_g = tf.cfg.alpha_g;
  if (tf.lp_mode_set) base.lp_mode = lp_mode_from_name(tf.lp_mode_name);

  fs::create_directories(tf.out_dir);
  std::string run_name = tf.name.empty()
                             ? tf.env.env + "_" + ds.mixture_label + "_" +
                                   std::string(algorithm_name(alg))
                             : tf.name;

  std::vector<double> finals;
  std::vector<ResultRow> rows;
  for (int k = 0; k < tf.seeds; ++k) {
    TrainConfig cfg = base;
    cfg.seed = tf.seed0 + static_cast<std::uint64_t>(k);
    TrainResult res = train(mdp, ds, cfg);
    std::string stem =
        (fs::path(tf.out_dir) / (run_name + "_seed" + std::to_string(cfg.seed))).string();
    write_metrics_csv(res.metrics, stem + ".metrics.csv");
    save_checkpoint(res.state, stem + ".ckpt");
    double final_ret = res.metrics.empty() ? 0.0 : res.metrics.back().norm_return;
    finals.push_back(final_ret);
    std::cout << "seed " << cfg.seed << ": final normalized return " << final_ret << "\n";
  }
  double mean = 0.0;
  for (double f : finals) mean += f / finals.size();
  double var = 0.0;
  for (double f : finals) var += (f - mean) * (f - mean);
  double stddev = finals.size() > 1 ? std::sqrt(var / (finals.size() - 1)) : 0.0;
  for (int k = 0; k < tf.seeds; ++k) {
    ResultRow row;
    row.env = tf.env.env;
    row.mixture = ds.mixture_label;
    row.algorithm = std::string(algorithm_name(alg));
    row.divergence = tf.flex.describe(tf.adaptive);
    row.seed = tf.seed0 + static_cast<std::uint64_t>(k);
    row.final_norm_return = finals[k];
    row.mean_over_seeds = mean;
    row.std_over_seeds = stddev;
    rows.push_back(row);
  }
  append_results((fs::path(tf.out_dir) / "results.csv").string(), rows, tf.overwrite);
  std::cout << "mean over " << tf.seeds << " seeds: " << mean << " +- " << stddev << "\n";
  return 0;
}

int cmd_eval(const EnvFlags& ef, const std::string& ckpt, bool greedy, int episodes,
             int horizon, std::uint64_t seed) {
  TabularMdp mdp = make_env(ef.env, ef.gamma, ef.noise);
  TrainState st = load_checkpoint(ckpt, mdp.n_states, mdp.n_actions);
  TabularPolicy pi = extract_policy(st, greedy);
  EvalResult ev = evaluate(mdp, pi, episodes, horizon, seed);
  std::cout << "mean_return=" << ev.mean_return << " exact_return=" << ev.exact_return
            << " normalized_return=" << ev.normalized_return << "\n";
  return 0;
}

int cmd_check(const std::string& suite, int max_size, std::uint64_t seed,
              const std::string& out_dir) {
  CheckOptions opts;
  opts.seed = seed;
  opts.max_size = max_size;
  std::vector<std::string> names;
  if (suite == "all")
    names = {"conjugacy", "continuity", "loss_shape", "duality", "perfdiff", "equivalence"};
  else
    names = {suite};
  std::vector<OracleReportRow> report;
  std::vector<EquivalenceRow> eq_table;
  std::vector<SuiteResult> results = run_suites(names, opts, &report, &eq_table);
  bool all_pass = true;
  for (const SuiteResult& r : results) {
    std::printf("[%s] %-12s (%.2fs) %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                r.seconds, r.detail.c_str());
    all_pass = all_pass && r.passed;
  }
  if (!report.empty()) {
    fs::create_directories(out_dir);
    std::string path = (fs::path(out_dir) / "oracle_report.csv").string();
    write_oracle_report(report, path);
    std::cout << "wrote " << path << "\n";
  }
  if (!eq_table.empty()) {
    fs::create_directories(out_dir);
    std::string path = (fs::path(out_dir) / "equivalence_report.csv").string();
    write_equivalence_report(eq_table, path);
    std::cout << "wrote " << path << "\n";
  }
  return all_pass ? 0 : 1;
}

int cmd_plot(const FlexFlags& ff, bool flex_given, const std::string& metrics,
             const std::string& out_file) {
  if (out_file.empty()) throw ConfigError("plot: --out is required");
  if (!metrics.empty()) {
    std::vector<MetricsRow> rows = read_metrics_csv(metrics);
    if (rows.empty()) throw IoError("plot: metrics file has no rows: " + metrics);
    plot_adaptive_trace(rows, out_file);
  } else if (flex_given) {
    FlexF flex = ff.build();
    plot_divergence_functions(flex, ff.describe(false), out_file);
  } else {
    throw ConfigError("plot: provide --metrics or a divergence spec");
  }
  std::cout << "wrote " << out_file << "\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"flexible f-divergence offline RL testbed"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "synthesize an offline dataset");
  EnvFlags gen_env;
  add_env_flags(gen, gen_env);
  std::string gen_mixture = "2p";
  int gen_traj = 200, gen_horizon = 25;
  std::uint64_t gen_seed = 0;
  std::string gen_out = output_root("."), gen_name;
  gen->add_option("--mixture", gen_mixture, "2p | 4p | 10p");
  gen->add_option("--n-trajectories", gen_traj, "trajectories across all components");
  gen->add_option("--horizon", gen_horizon, "rollout cap per trajectory");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--name", gen_name, "file stem (default <env>_<mixture>_s<seed>)");

  // train
  auto* tr = app.add_subcommand("train", "train on a dataset");
  TrainFlags tf;
  add_env_flags(tr, tf.env);
  add_flex_flags(tr, tf.flex);
  tr->add_option("--data", tf.data, "dataset base path (without extension)")->required();
  tr->add_option("--algorithm", tf.algorithm, "flex-f-q | flex-f-dice");
  std::string tr_adaptive;
  auto* tr_adaptive_opt =
      tr->add_option("--adaptive", tr_adaptive, "estimate alpha_pm and beta on-line (on/off)")
          ->expected(0, 1);
  tr->add_option("--seeds", tf.seeds, "number of seeds");
  tr->add_option("--seed0", tf.seed0, "first seed");
  tr->add_option("--out", tf.out_dir, "output directory")->default_val(output_root("."));
  tr->add_option("--name", tf.name, "run name");
  tr->add_flag("--overwrite", tf.overwrite, "replace existing result rows");
  auto* steps_opt = tr->add_option("--steps", tf.cfg.steps, "gradient steps");
  auto* batch_opt = tr->add_option("--batch-size", tf.cfg.batch_size, "batch size");
  auto* lrnu_opt = tr->add_option("--lr-nu", tf.cfg.lr_nu, "value-table learning rate");
  auto* lrcr_opt = tr->add_option("--lr-critic", tf.cfg.lr_critic, "critic learning rate");
  auto* lrpo_opt = tr->add_option("--lr-policy", tf.cfg.lr_policy, "policy learning rate");
  auto* temp_opt = tr->add_option("--awr-temperature", tf.cfg.awr_temperature,
                                  "advantage weighting temperature");
  auto* cliplo_opt = tr->add_option("--e-clip-lo", tf.cfg.e_clip_lo, "lower e_hat clip");
  auto* cliphi_opt = tr->add_option("--e-clip-hi", tf.cfg.e_clip_hi, "upper e_hat clip");
  auto* rs_opt = tr->add_option("--reward-scale", tf.cfg.reward_scale, "reward multiplier");
  auto* ev_opt = tr->add_option("--eval-interval", tf.cfg.eval_interval, "metrics cadence");
  auto* iota_opt = tr->add_option("--iota-b", tf.cfg.iota_b, "cosine similarity lower bound");
  auto* ema_opt = tr->add_option("--ema-decay", tf.cfg.ema_decay, "EMA smoothing factor");
  auto* ag_opt = tr->add_option("--alpha-g", tf.cfg.alpha_g, "global conjugate weighting");
  auto* lp_opt = tr->add_option("--lp-mode", tf.lp_mode_name,
                                "init_dist | uniform_value | neg_td_error | neg_estimated_td");
  std::string config_path;
  tr->add_option("--config", config_path, "key = value config file; flags override");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  EnvFlags ev_env;
  add_env_flags(ev, ev_env);
  std::string ev_ckpt;
  bool ev_greedy = false;
  int ev_episodes = 0, ev_horizon = 200;
  std::uint64_t ev_seed = 0;
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint path")->required();
  ev->add_flag("--greedy", ev_greedy, "argmax policy instead of softmax");
  ev->add_option("--episodes", ev_episodes, "Monte-Carlo episodes (0 = exact only)");
  ev->add_option("--horizon", ev_horizon, "rollout horizon");
  ev->add_option("--seed", ev_seed, "rollout seed");

  // check
  auto* ck = app.add_subcommand("check", "run the verification suites");
  std::string ck_suite = "all";
  int ck_max_size = 64;
  std::uint64_t ck_seed = 2024;
  std::string ck_out = output_root(".");
  ck->add_option("--suite", ck_suite,
                 "all | conjugacy | continuity | loss_shape | duality | perfdiff | equivalence");
  ck->add_option("--max-size", ck_max_size, "duality instance cap (state-action pairs)");
  ck->add_option("--seed", ck_seed, "suite seed");
  ck->add_option("--out", ck_out, "directory for oracle_report.csv");

  // plot
  auto* pl = app.add_subcommand("plot", "emit SVG function graphs or adaptive traces");
  FlexFlags pl_flex;
  add_flex_flags(pl, pl_flex);
  std::string pl_metrics, pl_out;
  pl->add_option("--metrics", pl_metrics, "metrics CSV for an alpha/beta trace");
  pl->add_option("--out", pl_out, "output SVG path")->required();

  // sweep
  auto* sw = app.add_subcommand("sweep", "grid of mixtures x algorithms x divergences");
  EnvFlags sw_env;
  add_env_flags(sw, sw_env);
  std::vector<std::string> sw_mixtures{"2p", "4p"};
  std::vector<std::string> sw_algorithms{"flex-f-q", "flex-f-dice"};
  std::vector<std::string> sw_divergences{"iql(0.7)", "soft_chi2"};
  std::string sw_adaptive_str;
  int sw_seeds = 1, sw_traj = 200, sw_horizon = 25;
  long sw_steps = 20000;
  std::uint64_t sw_seed0 = 0, sw_data_seed = 0;
  std::string sw_out = output_root(".");
  sw->add_option("--mixtures", sw_mixtures, "dataset mixtures")->delimiter(',');
  sw->add_option("--algorithms", sw_algorithms, "algorithms")->delimiter(',');
  sw->add_option("--divergences", sw_divergences, "preset specs")->delimiter(',');
  auto* sw_adaptive_opt =
      sw->add_option("--adaptive", sw_adaptive_str, "adaptive parameters for every run (on/off)")
          ->expected(0, 1);
  sw->add_option("--seeds", sw_seeds, "seeds per cell");
  sw->add_option("--seed0", sw_seed0, "first training seed");
  sw->add_option("--data-seed", sw_data_seed, "dataset seed");
  sw->add_option("--n-trajectories", sw_traj, "dataset size");
  sw->add_option("--horizon", sw_horizon, "dataset horizon");
  sw->add_option("--steps", sw_steps, "training steps per run");
  sw->add_option("--out", sw_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed())
      return cmd_gen_data(gen_env, gen_mixture, gen_traj, gen_horizon, gen_seed, gen_out,
                          gen_name);
    if (tr->parsed()) {
      if (!config_path.empty()) {
        auto kv = read_config_file(config_path);
        auto apply = [&](CLI::Option* opt, const std::string& key, auto& target) {
          if (opt->count() == 0 && kv.count(key)) {
            std::istringstream ss(kv.at(key));
            ss >> target;
          }
        };
        apply(steps_opt, "steps", tf.cfg.steps);
        apply(batch_opt, "batch_size", tf.cfg.batch_size);
        apply(lrnu_opt, "lr_nu", tf.cfg.lr_nu);
        apply(lrcr_opt, "lr_critic", tf.cfg.lr_critic);
        apply(lrpo_opt, "lr_policy", tf.cfg.lr_policy);
        apply(temp_opt, "awr_temperature", tf.cfg.awr_temperature);
        apply(cliplo_opt, "e_clip_lo", tf.cfg.e_clip_lo);
        apply(cliphi_opt, "e_clip_hi", tf.cfg.e_clip_hi);
        apply(rs_opt, "reward_scale", tf.cfg.reward_scale);
        apply(ev_opt, "eval_interval", tf.cfg.eval_interval);
        apply(iota_opt, "iota_b", tf.cfg.iota_b);
        apply(ema_opt, "ema_decay", tf.cfg.ema_decay);
        if (ag_opt->count() == 0 && kv.count("alpha_g")) {
          tf.cfg.alpha_g = std::stod(kv.at("alpha_g"));
          tf.alpha_g_set = true;
        }
        if (lp_opt->count() == 0 && kv.count("lp_mode")) {
          tf.lp_mode_name = kv.at("lp_mode");
          tf.lp_mode_set = true;
        }
      }
      if (ag_opt->count() > 0) tf.alpha_g_set = true;
      if (lp_opt->count() > 0) tf.lp_mode_set = true;
      if (tr_adaptive_opt->count() > 0) tf.adaptive = parse_on_off(tr_adaptive, "--adaptive");
      return cmd_train(tf);
    }
    if (ev->parsed())
      return cmd_eval(ev_env, ev_ckpt, ev_greedy, ev_episodes, ev_horizon, ev_seed);
    if (ck->parsed()) return cmd_check(ck_suite, ck_max_size, ck_seed, ck_out);
    if (pl->parsed()) {
      bool flex_given = !pl_flex.preset_spec.empty() || pl->count("--g-minus") > 0 ||
                        pl->count("--g-plus") > 0;
      return cmd_plot(pl_flex, flex_given, pl_metrics, pl_out);
    }
    if (sw->parsed()) {
      fs::create_directories(sw_out);
      for (const std::string& mixture : sw_mixtures) {
        std::string base =
            (fs::path(sw_out) / (sw_env.env + "_" + mixture + "_s" + std::to_string(sw_data_seed)))
                .string();
        if (!fs::exists(base + ".csv"))
          cmd_gen_data(sw_env, mixture, sw_traj, sw_horizon, sw_data_seed, sw_out,
                       fs::path(base).filename().string());
        for (const std::string& alg : sw_algorithms) {
          for (const std::string& div : sw_divergences) {
            TrainFlags run;
            run.env = sw_env;
            run.flex.preset_spec = div;
            run.data = base;
            run.algorithm = alg;
            run.adaptive = sw_adaptive_opt->count() > 0 &&
                           parse_on_off(sw_adaptive_str, "--adaptive");
            run.seeds = sw_seeds;
            run.seed0 = sw_seed0;
            run.out_dir = sw_out;
            run.overwrite = true;
            run.cfg.steps = sw_steps;
            run.name = sw_env.env + "_" + mixture + "_" + alg + "_" + div;
            cmd_train(run);
          }
        }
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const UnknownPreset& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace flexrl::cli
