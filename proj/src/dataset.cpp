#include "flexrl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "flexrl/lp_oracle.hpp"

namespace flexrl {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct VIRun {
  // Greedy-policy checkpoints in visit order; index is the count of
  // single-state value updates performed when the policy changed.
  std::vector<std::pair<long, std::vector<int>>> checkpoints;
  std::vector<double> memo;  // lazily evaluated normalized returns
};

// One asynchronous (single state per update) value-iteration pass with a
// damped update V <- V + eta (maxQ - V). A checkpoint is recorded whenever
// the greedy policy changes. Damping and a pessimistic random start spread
// the policy changes out, giving the calibration a fine return ladder.
VIRun run_async_vi(const TabularMdp& mdp, std::uint64_t seed, double eta,
                   bool random_init, double init_scale) {
  const int n = mdp.n_states, m = mdp.n_actions;
  Rng rng(seed);

  std::vector<double> values(n, 0.0);
  if (random_init)
    for (double& v : values) v = -init_scale * rng.uniform01();

  std::vector<double> q(static_cast<std::size_t>(n) * m);
  struct Pred {
    int s, a;
    double t;
  };
  std::vector<std::vector<Pred>> pred(n);
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < m; ++a) {
      double acc = 0.0;
      for (int s2 = 0; s2 < n; ++s2) {
        double t = mdp.T(s, a, s2);
        if (t > 0.0) {
          pred[s2].push_back({s, a, t});
          acc += t * values[s2];
        }
      }
      q[s * m + a] = mdp.r(s, a) + mdp.gamma * acc;
    }

  std::vector<int> greedy(n);
  auto row_argmax = [&](int s) {
    int best = 0;
    for (int a = 1; a < m; ++a)
      if (q[s * m + a] > q[s * m + best]) best = a;
    return best;
  };
  for (int s = 0; s < n; ++s) greedy[s] = row_argmax(s);

  VIRun run;
  run.checkpoints.push_back({0, greedy});

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);

  long index = 0;
  const long max_sweeps = 200000;
  for (long sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_delta = 0.0;
    for (int s : order) {
      ++index;
      double target = q[s * m + row_argmax(s)];
      double delta = eta * (target - values[s]);
      if (delta == 0.0) continue;
      max_delta = std::max(max_delta, std::fabs(delta));
      values[s] += delta;
      bool changed = false;
      for (const Pred& p : pred[s]) {
        q[p.s * m + p.a] += mdp.gamma * p.t * delta;
        int best = row_argmax(p.s);
        if (best != greedy[p.s]) {
          greedy[p.s] = best;
          changed = true;
        }
      }
      if (changed) run.checkpoints.push_back({index, greedy});
    }
    if (max_delta <= 1e-13) break;
  }
  run.checkpoints.push_back({index + 1, greedy});
  run.memo.assign(run.checkpoints.size(), std::numeric_limits<double>::quiet_NaN());
  return run;
}

struct MixtureSpec {
  std::vector<double> targets;
  std::vector<double> shares;
};

MixtureSpec mixture_spec(const std::string& mixture) {
  if (mixture == "2p") return {{40.0, 100.0}, {0.5, 0.5}};
  if (mixture == "4p") return {{10.0, 30.0, 60.0, 100.0}, {0.25, 0.25, 0.25, 0.25}};
  if (mixture == "10p") {
    MixtureSpec spec;
    for (int k = 1; k <= 10; ++k) {
      spec.targets.push_back(9.0 * k);
      spec.shares.push_back(0.1);
    }
    return spec;
  }
  throw ConfigError("unknown mixture: " + mixture + " (expected 2p, 4p or 10p)");
}

TabularPolicy one_hot_policy(const TabularMdp& mdp, const std::vector<int>& actions) {
  TabularPolicy pi;
  pi.n_states = mdp.n_states;
  pi.n_actions = mdp.n_actions;
  pi.probs.assign(mdp.sa_count(), 0.0);
  for (int s = 0; s < mdp.n_states; ++s) pi.p(s, actions[s]) = 1.0;
  return pi;
}

}  // namespace

OfflineDataset synthesize_dataset(const TabularMdp& mdp, const std::string& mixture,
                                  int n_trajectories, int horizon, std::uint64_t seed) {
  mdp.validate();
  if (n_trajectories <= 0 || horizon <= 0)
    throw ConfigError("synthesize_dataset: n_trajectories and horizon must be positive");
  MixtureSpec spec = mixture_spec(mixture);

  double rmax = 0.0;
  for (double r : mdp.reward) rmax = std::max(rmax, std::fabs(r));
  double init_scale = rmax / (1.0 - mdp.gamma);

  // A pool of value-iteration passes: the undamped one supplies the expert;
  // damped pessimistic restarts fill in intermediate expertise levels.
  std::vector<VIRun> runs;
  runs.push_back(run_async_vi(mdp, seed, 1.0, false, 0.0));
  const double etas[] = {0.5, 0.25, 0.12, 0.06, 0.03};
  for (int k = 0; k < 5; ++k)
    runs.push_back(run_async_vi(mdp, seed * 977 + 131 * (k + 1), etas[k], true, init_scale));

  ReturnAnchors anchors = return_anchors(mdp);
  auto ret_at = [&](VIRun& run, std::size_t i) {
    if (std::isnan(run.memo[i]))
      run.memo[i] = normalized_return(
          anchors, expected_return(mdp, one_hot_policy(mdp, run.checkpoints[i].second)));
    return run.memo[i];
  };

  // Returns grow roughly monotonically along each run; bisect per run, widen
  // locally, keep the best checkpoint over all runs.
  auto calibrate = [&](double target) {
    double best_err = std::numeric_limits<double>::infinity();
    std::pair<std::size_t, std::size_t> best{0, 0};
    for (std::size_t rix = 0; rix < runs.size(); ++rix) {
      VIRun& run = runs[rix];
      std::size_t lo = 0, hi = run.checkpoints.size() - 1;
      while (hi - lo > 1) {
        std::size_t mid = (lo + hi) / 2;
        if (ret_at(run, mid) < target)
          lo = mid;
        else
          hi = mid;
      }
      std::size_t wlo = lo > 10 ? lo - 10 : 0;
      std::size_t whi = std::min(run.checkpoints.size() - 1, hi + 10);
      for (std::size_t i = wlo; i <= whi; ++i) {
        double err = std::fabs(ret_at(run, i) - target);
        if (err < best_err) {
          best_err = err;
          best = {rix, i};
        }
      }
    }
    if (best_err > 10.0)
      throw CalibrationFailure(
          "synthesize_dataset: no checkpoint within 10 points of " + std::to_string(target) +
          " (best " + std::to_string(ret_at(runs[best.first], best.second)) + ")");
    return best;
  };

  OfflineDataset ds;
  ds.mixture_label = mixture;
  ds.seed = seed;
  ds.n_trajectories = n_trajectories;
  ds.horizon = horizon;
  ds.mdp_hash = mdp.hash();

  std::vector<int> counts(spec.targets.size());
  int assigned = 0;
  for (std::size_t i = 0; i < spec.targets.size(); ++i) {
    counts[i] = static_cast<int>(spec.shares[i] * n_trajectories);
    assigned += counts[i];
  }
  counts.back() += n_trajectories - assigned;  // remainder to the expert

  // done marks transitions into an absorbing rewarded state (the gridworld
  // goal), never horizon truncation.
  std::vector<bool> is_goal(mdp.n_states, false);
  for (int s = 0; s < mdp.n_states; ++s) {
    bool absorbing = true;
    for (int a = 0; a < mdp.n_actions; ++a)
      if (mdp.T(s, a, s) != 1.0) absorbing = false;
    is_goal[s] = absorbing && mdp.r(s, 0) > 0.0;
  }

  Rng rng(seed);
  for (std::size_t c = 0; c < spec.targets.size(); ++c) {
    std::size_t rix, cix;
    if (spec.targets[c] >= 100.0) {
      rix = 0;
      cix = runs[0].checkpoints.size() - 1;
    } else {
      std::tie(rix, cix) = calibrate(spec.targets[c]);
    }
    TabularPolicy pi = one_hot_policy(mdp, runs[rix].checkpoints[cix].second);
    ComponentInfo info;
    info.target_return = spec.targets[c];
    info.achieved_return = ret_at(runs[rix], cix);
    info.checkpoint_index =
        static_cast<long>(rix) * 1000000 + runs[rix].checkpoints[cix].first;
    info.n_trajectories = counts[c];
    ds.components.push_back(info);

    for (int traj = 0; traj < counts[c]; ++traj) {
      int s = static_cast<int>(rng.categorical(mdp.p0));
      ds.initial_states.push_back(s);
      for (int t = 0; t < horizon; ++t) {
        int a = 0;
        for (int k = 1; k < mdp.n_actions; ++k)
          if (pi.p(s, k) > pi.p(s, a)) a = k;
        std::span<const double> row(
            &mdp.transition[(static_cast<std::size_t>(s) * mdp.n_actions + a) * mdp.n_states],
            static_cast<std::size_t>(mdp.n_states));
        int s2 = static_cast<int>(rng.categorical(row));
        ds.transitions.push_back({s, a, mdp.r(s, a), s2, static_cast<bool>(is_goal[s2])});
        s = s2;
      }
    }
  }
  return ds;
}

void check_environment_consistency(const OfflineDataset& ds, const TabularMdp& mdp) {
  if (ds.initial_states.empty())
    throw ShapeError("dataset: initial_states must be nonempty");
  for (const Transition& t : ds.transitions) {
    if (t.s < 0 || t.s >= mdp.n_states || t.s_next < 0 || t.s_next >= mdp.n_states ||
        t.a < 0 || t.a >= mdp.n_actions)
      throw ShapeError("dataset: transition indices out of range");
    if (!(mdp.T(t.s, t.a, t.s_next) > 0.0))
      throw ShapeError("dataset: transition with zero model probability");
  }
  for (int s : ds.initial_states)
    if (s < 0 || s >= mdp.n_states) throw ShapeError("dataset: initial state out of range");
}

std::vector<double> empirical_weights(const OfflineDataset& ds, const TabularMdp& mdp) {
  std::vector<double> w(mdp.sa_count(), 0.0);
  for (const Transition& t : ds.transitions) w[t.s * mdp.n_actions + t.a] += 1.0;
  double total = static_cast<double>(ds.transitions.size());
  if (total == 0.0) throw ShapeError("empirical_weights: empty dataset");
  for (double& x : w) x /= total;
  return w;
}

TabularPolicy empirical_policy(const OfflineDataset& ds, const TabularMdp& mdp) {
  TabularPolicy pi;
  pi.n_states = mdp.n_states;
  pi.n_actions = mdp.n_actions;
  pi.probs.assign(mdp.sa_count(), 0.0);
  for (const Transition& t : ds.transitions) pi.p(t.s, t.a) += 1.0;
  for (int s = 0; s < mdp.n_states; ++s) {
    double sum = 0.0;
    for (int a = 0; a < mdp.n_actions; ++a) sum += pi.p(s, a);
    if (sum == 0.0) {
      for (int a = 0; a < mdp.n_actions; ++a) pi.p(s, a) = 1.0 / mdp.n_actions;
    } else {
      for (int a = 0; a < mdp.n_actions; ++a) pi.p(s, a) /= sum;
    }
  }
  return pi;
}

void save_dataset(const OfflineDataset& ds, const std::string& base_path) {
  {
    std::ofstream out(base_path + ".csv");
    if (!out) throw IoError("save_dataset: cannot write " + base_path + ".csv");
    out << "s,a,r,s_next,done\n";
    for (const Transition& t : ds.transitions)
      out << t.s << ',' << t.a << ',' << fmt17(t.r) << ',' << t.s_next << ','
          << (t.done ? 1 : 0) << '\n';
  }
  {
    std::ofstream out(base_path + ".init");
    if (!out) throw IoError("save_dataset: cannot write " + base_path + ".init");
    for (int s : ds.initial_states) out << s << '\n';
  }
  {
    std::ofstream out(base_path + ".meta");
    if (!out) throw IoError("save_dataset: cannot write " + base_path + ".meta");
    out << "mixture=" << ds.mixture_label << '\n';
    out << "seed=" << ds.seed << '\n';
    out << "n_trajectories=" << ds.n_trajectories << '\n';
    out << "horizon=" << ds.horizon << '\n';
    char hex[32];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(ds.mdp_hash));
    out << "mdp_hash=" << hex << '\n';
    out << "n_components=" << ds.components.size() << '\n';
    for (std::size_t i = 0; i < ds.components.size(); ++i) {
      const ComponentInfo& c = ds.components[i];
      out << "component_" << i << "_target=" << fmt17(c.target_return) << '\n';
      out << "component_" << i << "_return=" << fmt17(c.achieved_return) << '\n';
      out << "component_" << i << "_checkpoint=" << c.checkpoint_index << '\n';
      out << "component_" << i << "_trajectories=" << c.n_trajectories << '\n';
    }
  }
}

OfflineDataset load_dataset(const std::string& base_path) {
  OfflineDataset ds;
  std::ifstream csv(base_path + ".csv");
  if (!csv) throw IoError("load_dataset: cannot open " + base_path + ".csv");
  std::string line;
  if (!std::getline(csv, line) || line != "s,a,r,s_next,done")
    throw IoError("load_dataset: bad header in " + base_path + ".csv");
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    Transition t;
    int done = 0;
    if (std::sscanf(line.c_str(), "%d,%d,%lf,%d,%d", &t.s, &t.a, &t.r, &t.s_next, &done) != 5)
      throw IoError("load_dataset: bad row: " + line);
    t.done = done != 0;
    ds.transitions.push_back(t);
  }

  std::ifstream init(base_path + ".init");
  if (!init) throw IoError("load_dataset: cannot open " + base_path + ".init");
  int s;
  while (init >> s) ds.initial_states.push_back(s);

  std::ifstream meta(base_path + ".meta");
  if (!meta) throw IoError("load_dataset: cannot open " + base_path + ".meta");
  std::map<std::string, std::string> kv;
  while (std::getline(meta, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (kv.count("mixture")) ds.mixture_label = kv["mixture"];
  if (kv.count("seed")) ds.seed = std::stoull(kv["seed"]);
  if (kv.count("n_trajectories")) ds.n_trajectories = std::stoi(kv["n_trajectories"]);
  if (kv.count("horizon")) ds.horizon = std::stoi(kv["horizon"]);
  if (kv.count("mdp_hash")) ds.mdp_hash = std::stoull(kv["mdp_hash"], nullptr, 16);
  if (kv.count("n_components")) {
    int n = std::stoi(kv["n_components"]);
    for (int i = 0; i < n; ++i) {
      std::string p = "component_" + std::to_string(i) + "_";
      ComponentInfo c;
      c.target_return = std::stod(kv.at(p + "target"));
      c.achieved_return = std::stod(kv.at(p + "return"));
      c.checkpoint_index = std::stol(kv.at(p + "checkpoint"));
      c.n_trajectories = std::stoi(kv.at(p + "trajectories"));
      ds.components.push_back(c);
    }
  }
  return ds;
}

}  // namespace flexrl
