#include "flexrl/mdp.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <string>

namespace flexrl {

namespace {

void check_lengths(const TabularMdp& mdp, std::span<const double> nu, const char* op) {
  if (static_cast<int>(nu.size()) != mdp.n_states)
    throw ShapeError(std::string(op) + ": nu has length " + std::to_string(nu.size()) +
                     ", expected " + std::to_string(mdp.n_states));
}

// Row-stochastic state transition matrix under a policy.
Eigen::MatrixXd policy_kernel(const TabularMdp& mdp, const TabularPolicy& policy) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      double pa = policy.p(s, a);
      if (pa == 0.0) continue;
      for (int s2 = 0; s2 < mdp.n_states; ++s2) P(s, s2) += pa * mdp.T(s, a, s2);
    }
  return P;
}

}  // namespace

void TabularMdp::validate() const {
  if (n_states <= 0 || n_actions <= 0) throw ShapeError("TabularMdp: empty state/action space");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ShapeError("TabularMdp: gamma must be in [0,1)");
  if (static_cast<int>(transition.size()) != n_states * n_actions * n_states ||
      static_cast<int>(reward.size()) != n_states * n_actions ||
      static_cast<int>(p0.size()) != n_states)
    throw ShapeError("TabularMdp: table sizes inconsistent with dimensions");
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) {
        double t = T(s, a, s2);
        if (t < 0.0) throw ShapeError("TabularMdp: negative transition probability");
        sum += t;
      }
      if (std::fabs(sum - 1.0) > 1e-12)
        throw ShapeError("TabularMdp: transition row (" + std::to_string(s) + "," +
                         std::to_string(a) + ") sums to " + std::to_string(sum));
    }
  double sum = 0.0;
  for (double p : p0) {
    if (p < 0.0) throw ShapeError("TabularMdp: negative p0 entry");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-12) throw ShapeError("TabularMdp: p0 does not sum to 1");
}

std::uint64_t TabularMdp::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const char* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(data[i]);
      h *= 1099511628211ULL;
    }
  };
  char buf[64];
  auto mix_double = [&](double v) {
    int n = std::snprintf(buf, sizeof buf, "%.17g;", v);
    mix(buf, n);
  };
  int n = std::snprintf(buf, sizeof buf, "%d,%d;", n_states, n_actions);
  mix(buf, n);
  mix_double(gamma);
  for (double v : transition) mix_double(v);
  for (double v : reward) mix_double(v);
  for (double v : p0) mix_double(v);
  return h;
}

void TabularPolicy::validate() const {
  if (static_cast<int>(probs.size()) != n_states * n_actions)
    throw ShapeError("TabularPolicy: table size mismatch");
  for (int s = 0; s < n_states; ++s) {
    double sum = 0.0;
    for (int a = 0; a < n_actions; ++a) {
      if (p(s, a) < 0.0) throw ShapeError("TabularPolicy: negative probability");
      sum += p(s, a);
    }
    if (std::fabs(sum - 1.0) > 1e-12)
      throw ShapeError("TabularPolicy: row " + std::to_string(s) + " sums to " +
                       std::to_string(sum));
  }
}

std::vector<double> apply_T(const TabularMdp& mdp, std::span<const double> nu) {
  check_lengths(mdp, nu, "apply_T");
  std::vector<double> out(mdp.sa_count());
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      double acc = 0.0;
      for (int s2 = 0; s2 < mdp.n_states; ++s2) acc += mdp.T(s, a, s2) * nu[s2];
      out[s * mdp.n_actions + a] = acc;
    }
  return out;
}

std::vector<double> td_error(const TabularMdp& mdp, std::span<const double> nu) {
  check_lengths(mdp, nu, "td_error");
  std::vector<double> e = apply_T(mdp, nu);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      double& v = e[s * mdp.n_actions + a];
      v = mdp.r(s, a) + mdp.gamma * v - nu[s];
    }
  return e;
}

std::vector<double> policy_value(const TabularMdp& mdp, const TabularPolicy& policy) {
  policy.validate();
  Eigen::MatrixXd A =
      Eigen::MatrixXd::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * policy_kernel(mdp, policy);
  Eigen::VectorXd r_pi = Eigen::VectorXd::Zero(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) r_pi(s) += policy.p(s, a) * mdp.r(s, a);
  Eigen::VectorXd v = A.partialPivLu().solve(r_pi);
  if ((A * v - r_pi).lpNorm<Eigen::Infinity>() > 1e-10 * (1.0 + r_pi.lpNorm<Eigen::Infinity>()))
    throw SingularSystem("policy_value: solve residual too large");
  return std::vector<double>(v.data(), v.data() + mdp.n_states);
}

OccupancyMeasure exact_occupancy(const TabularMdp& mdp, const TabularPolicy& policy) {
  policy.validate();
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(mdp.n_states, mdp.n_states) -
                      mdp.gamma * policy_kernel(mdp, policy).transpose();
  Eigen::VectorXd b(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) b(s) = (1.0 - mdp.gamma) * mdp.p0[s];
  Eigen::VectorXd ds = A.partialPivLu().solve(b);
  if ((A * ds - b).lpNorm<Eigen::Infinity>() > 1e-10)
    throw SingularSystem("exact_occupancy: solve residual too large");
  OccupancyMeasure occ;
  occ.n_states = mdp.n_states;
  occ.n_actions = mdp.n_actions;
  occ.d.resize(mdp.sa_count());
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      occ.d[s * mdp.n_actions + a] = ds(s) * policy.p(s, a);
  return occ;
}

double perf_diff_check(const TabularMdp& mdp, const TabularPolicy& dataset_policy,
                       std::span<const double> nu) {
  check_lengths(mdp, nu, "perf_diff_check");
  std::vector<double> v = policy_value(mdp, dataset_policy);
  OccupancyMeasure occ = exact_occupancy(mdp, dataset_policy);
  std::vector<double> e = td_error(mdp, nu);
  double lhs = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) lhs += mdp.p0[s] * (v[s] - nu[s]);
  double rhs = 0.0;
  for (int i = 0; i < mdp.sa_count(); ++i) rhs += occ.d[i] * e[i];
  return lhs - rhs / (1.0 - mdp.gamma);
}

TabularMdp make_gridworld(int width, int height, double gamma, double noise) {
  if (width <= 0 || height <= 0 || width * height > 400)
    throw SizeError("make_gridworld: width*height must be in [1, 400]");
  if (!(noise >= 0.0 && noise < 1.0))
    throw SizeError("make_gridworld: noise must be in [0, 1)");

  const int n = width * height;
  const int goal = n - 1;  // far corner
  TabularMdp mdp;
  mdp.n_states = n;
  mdp.n_actions = 4;
  mdp.gamma = gamma;
  mdp.transition.assign(static_cast<std::size_t>(n) * 4 * n, 0.0);
  mdp.reward.assign(static_cast<std::size_t>(n) * 4, 0.0);
  mdp.p0.assign(n, 0.0);

  const int dx[4] = {0, 0, -1, 1};  // up, down, left, right
  const int dy[4] = {-1, 1, 0, 0};
  auto step = [&](int s, int dir) {
    int x = s % width, y = s / width;
    int nx = x + dx[dir], ny = y + dy[dir];
    if (nx < 0 || nx >= width || ny < 0 || ny >= height) return s;
    return ny * width + nx;
  };

  for (int s = 0; s < n; ++s)
    for (int a = 0; a < 4; ++a) {
      if (s == goal) {
        mdp.T(s, a, s) = 1.0;
        mdp.r(s, a) = 1.0 - gamma;  // one unit of discounted reward in total
        continue;
      }
      mdp.T(s, a, step(s, a)) += 1.0 - noise;
      for (int d = 0; d < 4; ++d) mdp.T(s, a, step(s, d)) += noise / 4.0;
    }

  if (n == 1) {
    mdp.p0[0] = 1.0;
  } else {
    for (int s = 0; s < n; ++s)
      if (s != goal) mdp.p0[s] = 1.0 / (n - 1);
  }
  mdp.validate();
  return mdp;
}

TabularMdp make_random_mdp(int n_states, int n_actions, std::uint64_t seed, double gamma,
                           int branching) {
  TabularMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.transition.assign(static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0);
  mdp.reward.resize(static_cast<std::size_t>(n_states) * n_actions);
  mdp.p0.assign(n_states, 0.0);
  Rng rng(seed);
  int b = branching > 0 ? std::min(branching, n_states) : n_states;
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) {
      // Random mass over b successors plus a small self loop.
      std::vector<double> mass(n_states, 0.0);
      for (int k = 0; k < b; ++k) {
        int s2 = b == n_states ? k : static_cast<int>(rng.uniform_int(n_states));
        mass[s2] += rng.uniform(0.05, 1.0);
      }
      mass[s] += 0.05;
      double sum = 0.0;
      for (double m : mass) sum += m;
      for (int s2 = 0; s2 < n_states; ++s2) mdp.T(s, a, s2) = mass[s2] / sum;
      mdp.r(s, a) = rng.uniform(-1.0, 1.0);
    }
  double sum = 0.0;
  for (int s = 0; s < n_states; ++s) {
    mdp.p0[s] = rng.uniform(0.1, 1.0);
    sum += mdp.p0[s];
  }
  for (double& p : mdp.p0) p /= sum;
  // Renormalize rows exactly to the validate() tolerance.
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) {
      double rs = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) rs += mdp.T(s, a, s2);
      for (int s2 = 0; s2 < n_states; ++s2) mdp.T(s, a, s2) /= rs;
    }
  mdp.validate();
  return mdp;
}

TabularPolicy uniform_policy(const TabularMdp& mdp) {
  TabularPolicy pi;
  pi.n_states = mdp.n_states;
  pi.n_actions = mdp.n_actions;
  pi.probs.assign(mdp.sa_count(), 1.0 / mdp.n_actions);
  return pi;
}

TabularPolicy random_policy(const TabularMdp& mdp, Rng& rng) {
  TabularPolicy pi;
  pi.n_states = mdp.n_states;
  pi.n_actions = mdp.n_actions;
  pi.probs.resize(mdp.sa_count());
  for (int s = 0; s < mdp.n_states; ++s) {
    double sum = 0.0;
    for (int a = 0; a < mdp.n_actions; ++a) {
      double w = rng.uniform(0.05, 1.0);
      pi.p(s, a) = w;
      sum += w;
    }
    for (int a = 0; a < mdp.n_actions; ++a) pi.p(s, a) /= sum;
  }
  return pi;
}

TabularPolicy greedy_from_values(const TabularMdp& mdp, std::span<const double> values) {
  check_lengths(mdp, values, "greedy_from_values");
  TabularPolicy pi;
  pi.n_states = mdp.n_states;
  pi.n_actions = mdp.n_actions;
  pi.probs.assign(mdp.sa_count(), 0.0);
  std::vector<double> q = apply_T(mdp, values);
  for (int s = 0; s < mdp.n_states; ++s) {
    int best = 0;
    double best_q = -1e300;
    for (int a = 0; a < mdp.n_actions; ++a) {
      double qa = mdp.r(s, a) + mdp.gamma * q[s * mdp.n_actions + a];
      if (qa > best_q) {
        best_q = qa;
        best = a;
      }
    }
    pi.p(s, best) = 1.0;
  }
  return pi;
}

}  // namespace flexrl
