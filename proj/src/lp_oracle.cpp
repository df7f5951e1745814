#include "flexrl/lp_oracle.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <queue>

namespace flexrl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Per-state linear coefficient alpha(s) for the primal objective. The
// negative-TD modes fold the linear term into the loss instead; their
// equivalent alpha (used by the dual flow constraint) is
// alpha_eff(s) = sum_a w(s,a) - gamma (T_* w)(s), with the constant
// -sum w r moved to the dual objective.
struct LinearTerm {
  Eigen::VectorXd alpha;
  bool fold_neg = false;
  double dual_offset = 0.0;
};

LinearTerm make_linear_term(const TabularMdp& mdp, const std::vector<double>& w,
                            LpMode mode) {
  LinearTerm lt;
  lt.alpha = Eigen::VectorXd::Zero(mdp.n_states);
  switch (mode) {
    case LpMode::InitDist:
      for (int s = 0; s < mdp.n_states; ++s) lt.alpha(s) = (1.0 - mdp.gamma) * mdp.p0[s];
      break;
    case LpMode::UniformValue:
      lt.alpha.setConstant(1.0 - mdp.gamma);
      break;
    case LpMode::NegTdError:
    case LpMode::NegEstimatedTd: {
      lt.fold_neg = true;
      for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) {
          double wsa = w[s * mdp.n_actions + a];
          if (wsa == 0.0) continue;
          lt.alpha(s) += wsa;
          for (int s2 = 0; s2 < mdp.n_states; ++s2)
            lt.alpha(s2) -= mdp.gamma * mdp.T(s, a, s2) * wsa;
          lt.dual_offset -= wsa * mdp.r(s, a);
        }
      break;
    }
  }
  return lt;
}

void check_weights(const TabularMdp& mdp, const std::vector<double>& w) {
  if (static_cast<int>(w.size()) != mdp.sa_count())
    throw ShapeError("oracle: weight table size mismatch");
  double sum = 0.0;
  for (double x : w) {
    if (x < 0.0) throw ShapeError("oracle: negative weight");
    sum += x;
  }
  if (sum <= 0.0) throw ShapeError("oracle: empty weight table");
}

// Every state reachable from the relevant start set through dataset-support
// transitions must carry dataset actions.
void check_coverage(const TabularMdp& mdp, const std::vector<double>& w, LpMode mode) {
  std::vector<char> covered(mdp.n_states, 0);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      if (w[s * mdp.n_actions + a] > 0.0) covered[s] = 1;

  std::vector<char> seen(mdp.n_states, 0);
  std::queue<int> frontier;
  auto push = [&](int s) {
    if (!seen[s]) {
      seen[s] = 1;
      frontier.push(s);
    }
  };
  if (mode == LpMode::InitDist) {
    for (int s = 0; s < mdp.n_states; ++s)
      if (mdp.p0[s] > 0.0) push(s);
  } else if (mode == LpMode::UniformValue) {
    for (int s = 0; s < mdp.n_states; ++s) push(s);
  } else {
    for (int s = 0; s < mdp.n_states; ++s)
      if (covered[s]) push(s);
  }
  while (!frontier.empty()) {
    int s = frontier.front();
    frontier.pop();
    if (!covered[s])
      throw CoverageError("oracle: state " + std::to_string(s) +
                          " is reachable but has no dataset coverage");
    for (int a = 0; a < mdp.n_actions; ++a) {
      if (w[s * mdp.n_actions + a] == 0.0) continue;
      for (int s2 = 0; s2 < mdp.n_states; ++s2)
        if (mdp.T(s, a, s2) > 0.0) push(s2);
    }
  }
}

// Conjugate-side evaluation with optional clamping into the domain interior.
struct ConjEval {
  double value;       // alpha_g * g(x) after clamping
  double zeta;        // derivative d/de = inv(x)
  double dzeta_de;    // second derivative contribution, 0 on the clamped flats
  bool clamped;
};

class NuObjective {
 public:
  NuObjective(const TabularMdp& mdp, const std::vector<double>& w, const FlexF& flex,
              const LinearTerm& lt, double alpha_g, bool clip)
      : mdp_(mdp), w_(w), flex_(flex), lt_(lt), alpha_g_(alpha_g), clip_(clip) {
    Interval dom = flex.e_domain();
    // Back finite endpoints off so derivative evaluations stay interior.
    lo_ = dom.lo_finite() ? dom.lo + 1e-9 : -kInf;
    hi_ = dom.hi_finite() ? dom.hi - 1e-9 : kInf;
    for (int i = 0; i < mdp.sa_count(); ++i)
      if (w[i] > 0.0) support_.push_back(i);
  }

  const std::vector<int>& support() const { return support_; }

  ConjEval eval_conj(double e) const {
    double x = e / alpha_g_;
    ConjEval out{0.0, 0.0, 0.0, false};
    if (x < lo_ || x > hi_) {
      if (!clip_)
        throw DomainBlowup("solve_regularized_nu: e/alpha_g = " + std::to_string(x) +
                           " left the conjugate domain " + flex_.e_domain().str());
      double xb = std::min(std::max(x, lo_), hi_);
      double gb = flex_.g(xb);
      double zb = flex_.gstar_prime_inv(xb);
      out.value = alpha_g_ * (gb + zb * (x - xb));  // linear extension
      out.zeta = zb;
      out.dzeta_de = 0.0;
      out.clamped = true;
      return out;
    }
    // Overflow (e.g. the KL conjugate far out on the axis) shows up as an
    // infinite value; report it and let the line search reject the point.
    out.value = alpha_g_ * flex_.g(x);
    if (!std::isfinite(out.value)) {
      out.value = kInf;
      return out;
    }
    out.zeta = flex_.gstar_prime_inv(x);
    if (!std::isfinite(out.zeta)) {
      out.value = kInf;
      return out;
    }
    out.dzeta_de = 1.0 / (alpha_g_ * flex_.gstar_second(out.zeta));
    return out;
  }

  double value(const Eigen::VectorXd& nu) const {
    double obj = lt_.fold_neg ? 0.0 : lt_.alpha.dot(nu);
    for (int idx : support_) {
      int s = idx / mdp_.n_actions, a = idx % mdp_.n_actions;
      double e = e_at(nu, s, a);
      ConjEval c = eval_conj(e);
      obj += w_[idx] * (c.value - (lt_.fold_neg ? e : 0.0));
    }
    return obj;
  }

  void grad_hess(const Eigen::VectorXd& nu, Eigen::VectorXd& grad,
                 Eigen::MatrixXd& hess) const {
    grad = lt_.fold_neg ? Eigen::VectorXd::Zero(mdp_.n_states) : lt_.alpha;
    hess.setZero(mdp_.n_states, mdp_.n_states);
    Eigen::VectorXd v(mdp_.n_states);
    for (int idx : support_) {
      int s = idx / mdp_.n_actions, a = idx % mdp_.n_actions;
      double e = e_at(nu, s, a);
      ConjEval c = eval_conj(e);
      double coeff = w_[idx] * (c.zeta - (lt_.fold_neg ? 1.0 : 0.0));
      // de/dnu = gamma T(.|s,a) - indicator(s)
      v.setZero();
      for (int s2 = 0; s2 < mdp_.n_states; ++s2) {
        double t = mdp_.T(s, a, s2);
        if (t > 0.0) v(s2) = mdp_.gamma * t;
      }
      v(s) -= 1.0;
      grad += coeff * v;
      if (c.dzeta_de > 0.0) hess += (w_[idx] * c.dzeta_de) * (v * v.transpose());
    }
  }

  double e_at(const Eigen::VectorXd& nu, int s, int a) const {
    double acc = 0.0;
    for (int s2 = 0; s2 < mdp_.n_states; ++s2) {
      double t = mdp_.T(s, a, s2);
      if (t > 0.0) acc += t * nu(s2);
    }
    return mdp_.r(s, a) + mdp_.gamma * acc - nu(s);
  }

 private:
  const TabularMdp& mdp_;
  const std::vector<double>& w_;
  FlexF flex_;
  LinearTerm lt_;
  double alpha_g_;
  bool clip_;
  double lo_, hi_;
  std::vector<int> support_;
};

}  // namespace

std::vector<double> value_iteration(const TabularMdp& mdp, double tol, long max_sweeps) {
  if (!(tol > 0.0)) throw ConfigError("value_iteration: tol must be positive");
  std::vector<double> v(mdp.n_states, 0.0), next(mdp.n_states, 0.0);
  for (long sweep = 0; sweep < max_sweeps; ++sweep) {
    double resid = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
      double best = -kInf;
      for (int a = 0; a < mdp.n_actions; ++a) {
        double acc = 0.0;
        for (int s2 = 0; s2 < mdp.n_states; ++s2) acc += mdp.T(s, a, s2) * v[s2];
        best = std::max(best, mdp.r(s, a) + mdp.gamma * acc);
      }
      next[s] = best;
      resid = std::max(resid, std::fabs(best - v[s]));
    }
    v.swap(next);
    // One more application contracts the residual by gamma, so the returned
    // table already satisfies ||TV - V|| <= tol.
    if (resid <= tol) break;
  }
  return v;
}

ReturnAnchors return_anchors(const TabularMdp& mdp) {
  ReturnAnchors a;
  a.r_random = expected_return(mdp, uniform_policy(mdp));
  std::vector<double> vstar = value_iteration(mdp, 1e-12);
  // Greedy extraction then exact evaluation removes the iteration tail.
  a.r_opt = expected_return(mdp, greedy_from_values(mdp, vstar));
  return a;
}

double expected_return(const TabularMdp& mdp, const TabularPolicy& policy) {
  std::vector<double> v = policy_value(mdp, policy);
  double out = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) out += mdp.p0[s] * v[s];
  return out;
}

double normalized_return(const ReturnAnchors& anchors, double ret) {
  double span = anchors.r_opt - anchors.r_random;
  if (span <= 0.0) return 100.0;  // degenerate MDP: every policy is optimal
  return 100.0 * (ret - anchors.r_random) / span;
}

std::vector<double> occupancy_residual(const TabularMdp& mdp,
                                       const std::vector<double>& weights,
                                       const std::vector<double>& zeta, LpMode lp_mode) {
  check_weights(mdp, weights);
  if (zeta.size() != weights.size())
    throw ShapeError("occupancy_residual: zeta size mismatch");
  LinearTerm lt = make_linear_term(mdp, weights, lp_mode);
  std::vector<double> resid(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) resid[s] = -lt.alpha(s);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      double m = weights[s * mdp.n_actions + a] * zeta[s * mdp.n_actions + a];
      if (m == 0.0) continue;
      resid[s] += m;
      for (int s2 = 0; s2 < mdp.n_states; ++s2)
        resid[s2] -= mdp.gamma * mdp.T(s, a, s2) * m;
    }
  return resid;
}

std::vector<double> occupancy_residual(const TabularMdp& mdp, const OfflineDataset& dataset,
                                       const std::vector<double>& zeta, LpMode lp_mode) {
  return occupancy_residual(mdp, empirical_weights(dataset, mdp), zeta, lp_mode);
}

LpSolution solve_regularized_nu(const TabularMdp& mdp, const std::vector<double>& weights,
                                const FlexF& flex, LpMode lp_mode, double alpha_g,
                                const SolveOptions& opts) {
  mdp.validate();
  check_weights(mdp, weights);
  check_coverage(mdp, weights, lp_mode);
  if (!(alpha_g > 0.0)) throw ConfigError("solve_regularized_nu: alpha_g must be positive");

  LinearTerm lt = make_linear_term(mdp, weights, lp_mode);
  NuObjective obj(mdp, weights, flex, lt, alpha_g, opts.clip_to_domain);

  Eigen::VectorXd nu = Eigen::VectorXd::Zero(mdp.n_states);
  double f = obj.value(nu);
  if (!std::isfinite(f))
    throw DomainBlowup("solve_regularized_nu: objective not finite at nu = 0");

  Eigen::VectorXd grad(mdp.n_states);
  Eigen::MatrixXd hess(mdp.n_states, mdp.n_states);
  long it = 0;
  for (; it < opts.max_iterations; ++it) {
    obj.grad_hess(nu, grad, hess);
    if (grad.lpNorm<Eigen::Infinity>() <= opts.grad_tol) break;

    // Damped Newton direction; ridge until the step decreases the objective.
    double ridge = 1e-12;
    Eigen::VectorXd dir;
    for (int tries = 0; tries < 60; ++tries) {
      Eigen::MatrixXd H = hess;
      H.diagonal().array() += ridge;
      dir = -H.ldlt().solve(grad);
      if (std::isfinite(dir.lpNorm<Eigen::Infinity>()) && grad.dot(dir) < 0.0) break;
      ridge *= 100.0;
    }
    double t = 1.0;
    double gd = grad.dot(dir);
    bool moved = false;
    for (int ls = 0; ls < 80; ++ls) {
      Eigen::VectorXd cand = nu + t * dir;
      double fc;
      try {
        fc = obj.value(cand);
      } catch (const DomainBlowup&) {
        fc = kInf;
      }
      if (std::isfinite(fc) && fc <= f + 1e-4 * t * gd) {
        nu = cand;
        f = fc;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) {
      // Fall back to a tiny gradient step before giving up.
      Eigen::VectorXd cand = nu - 1e-12 * grad;
      double fc = obj.value(cand);
      if (fc < f) {
        nu = cand;
        f = fc;
      } else {
        break;
      }
    }
  }
  obj.grad_hess(nu, grad, hess);
  if (grad.lpNorm<Eigen::Infinity>() > opts.grad_tol * 10.0)
    throw Error("solve_regularized_nu: stationarity " +
                std::to_string(grad.lpNorm<Eigen::Infinity>()) +
                " not reached within the step budget");

  LpSolution sol;
  sol.nu_star.assign(nu.data(), nu.data() + mdp.n_states);
  sol.zeta_star.assign(mdp.sa_count(), 0.0);
  sol.primal_objective = f;
  sol.iterations = it;
  double dual = lt.dual_offset;
  for (int idx : obj.support()) {
    int s = idx / mdp.n_actions, a = idx % mdp.n_actions;
    ConjEval c = obj.eval_conj(obj.e_at(nu, s, a));
    sol.zeta_star[idx] = c.zeta;
    if (c.zeta < 0.0) ++sol.negative_zeta_count;
    dual += weights[idx] * (c.zeta * mdp.r(s, a) - alpha_g * flex.gstar(c.zeta));
  }
  sol.dual_objective = dual;  // witness value at the optimality-rule zeta
  sol.duality_gap = std::fabs(sol.primal_objective - sol.dual_objective);
  return sol;
}

LpSolution solve_regularized_nu(const TabularMdp& mdp, const OfflineDataset& dataset,
                                const FlexF& flex, LpMode lp_mode, double alpha_g,
                                const SolveOptions& opts) {
  return solve_regularized_nu(mdp, empirical_weights(dataset, mdp), flex, lp_mode, alpha_g,
                              opts);
}

LpSolution solve_regularized_dual(const TabularMdp& mdp, const std::vector<double>& weights,
                                  const FlexF& flex, double alpha_g, LpMode lp_mode,
                                  const SolveOptions& opts) {
  mdp.validate();
  check_weights(mdp, weights);
  check_coverage(mdp, weights, lp_mode);
  if (mdp.sa_count() > 256)
    throw SizeError("solve_regularized_dual: limited to 256 state-action pairs");
  if (!(alpha_g > 0.0)) throw ConfigError("solve_regularized_dual: alpha_g must be positive");

  LinearTerm lt = make_linear_term(mdp, weights, lp_mode);
  std::vector<int> support;
  for (int i = 0; i < mdp.sa_count(); ++i)
    if (weights[i] > 0.0) support.push_back(i);
  const int m = static_cast<int>(support.size());
  const int n = mdp.n_states;

  // e = A z - alpha with A(sigma, j) = w_j (delta - gamma T).
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, m);
  Eigen::VectorXd r(m), w(m);
  for (int j = 0; j < m; ++j) {
    int s = support[j] / mdp.n_actions, a = support[j] % mdp.n_actions;
    w(j) = weights[support[j]];
    r(j) = mdp.r(s, a);
    A(s, j) += w(j);
    for (int s2 = 0; s2 < n; ++s2) A(s2, j) -= mdp.gamma * mdp.T(s, a, s2) * w(j);
  }

  Interval zdom = flex.zeta_domain();
  const double zlo = zdom.lo_finite() ? zdom.lo + 1e-10 : -kInf;

  auto objective = [&](const Eigen::VectorXd& z) {
    double d = 0.0;
    for (int j = 0; j < m; ++j) d += w(j) * (z(j) * r(j) - alpha_g * flex.gstar(z(j)));
    return d;
  };

  Eigen::VectorXd z = Eigen::VectorXd::Ones(m);
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(n);
  double mu = 10.0;
  long total_it = 0;
  double resid_norm = kInf;

  for (int outer = 0; outer < 80; ++outer) {
    // Maximize the penalized objective by damped Newton ascent.
    for (long it = 0; it < opts.max_iterations; ++it, ++total_it) {
      Eigen::VectorXd e = A * z - lt.alpha;
      Eigen::VectorXd lam_eff = lambda + mu * e;
      Eigen::VectorXd grad(m);
      Eigen::VectorXd curv(m);
      for (int j = 0; j < m; ++j) {
        grad(j) = w(j) * (r(j) - alpha_g * flex.gstar_prime(z(j)));
        curv(j) = w(j) * alpha_g * flex.gstar_second(z(j));
      }
      grad -= A.transpose() * lam_eff;
      if (grad.lpNorm<Eigen::Infinity>() <= std::max(1e-12, 1e-4 * opts.flow_tol)) break;

      Eigen::MatrixXd H = mu * (A.transpose() * A);
      H.diagonal() += curv;
      Eigen::VectorXd dir = H.ldlt().solve(grad);
      if (!std::isfinite(dir.lpNorm<Eigen::Infinity>())) {
        H.diagonal().array() += 1e-8;
        dir = H.ldlt().solve(grad);
      }

      // Keep the step inside the zeta domain.
      double tmax = 1.0;
      if (std::isfinite(zlo))
        for (int j = 0; j < m; ++j)
          if (dir(j) < 0.0) tmax = std::min(tmax, 0.995 * (zlo - z(j)) / dir(j));
      auto merit = [&](const Eigen::VectorXd& cand) -> double {
        try {
          Eigen::VectorXd ec = A * cand - lt.alpha;
          double v = objective(cand) - lambda.dot(ec) - 0.5 * mu * ec.squaredNorm();
          return std::isfinite(v) ? v : -kInf;
        } catch (const DomainError&) {
          return -kInf;
        }
      };
      double f0 = merit(z);
      double t = tmax;
      bool moved = false;
      for (int ls = 0; ls < 70; ++ls) {
        Eigen::VectorXd cand = z + t * dir;
        bool ok = true;
        if (std::isfinite(zlo))
          for (int j = 0; j < m; ++j)
            if (cand(j) <= zlo) ok = false;
        if (ok) {
          double fc = merit(cand);
          if (std::isfinite(fc) && fc >= f0 + 1e-4 * t * grad.dot(dir)) {
            z = cand;
            moved = true;
            break;
          }
        }
        t *= 0.5;
      }
      if (!moved) break;
    }

    Eigen::VectorXd e = A * z - lt.alpha;
    double prev = resid_norm;
    resid_norm = e.lpNorm<Eigen::Infinity>();
    if (resid_norm <= opts.flow_tol) break;
    lambda += mu * e;
    if (resid_norm > 0.25 * prev) mu = std::min(mu * 8.0, 1e14);
  }

  if (resid_norm > opts.flow_tol)
    throw Infeasible("solve_regularized_dual: flow residual " + std::to_string(resid_norm) +
                     " above tolerance; support cannot carry the required flow");

  LpSolution sol;
  sol.nu_star.assign(lambda.data(), lambda.data() + n);  // multipliers approximate nu*
  sol.zeta_star.assign(mdp.sa_count(), 0.0);
  for (int j = 0; j < m; ++j) {
    sol.zeta_star[support[j]] = z(j);
    if (z(j) < 0.0) ++sol.negative_zeta_count;
  }
  sol.dual_objective = objective(z) + lt.dual_offset;
  sol.primal_objective = sol.dual_objective;
  sol.duality_gap = 0.0;
  sol.iterations = total_it;
  return sol;
}

LpSolution solve_regularized_dual(const TabularMdp& mdp, const OfflineDataset& dataset,
                                  const FlexF& flex, double alpha_g, LpMode lp_mode,
                                  const SolveOptions& opts) {
  return solve_regularized_dual(mdp, empirical_weights(dataset, mdp), flex, alpha_g,
                                lp_mode, opts);
}

LpSolution duality_gap_report(const TabularMdp& mdp, const std::vector<double>& weights,
                              const FlexF& flex, double alpha_g, LpMode lp_mode,
                              const SolveOptions& opts) {
  LpSolution primal = solve_regularized_nu(mdp, weights, flex, lp_mode, alpha_g, opts);
  LpSolution dual = solve_regularized_dual(mdp, weights, flex, alpha_g, lp_mode, opts);
  LpSolution out;
  out.nu_star = primal.nu_star;
  out.zeta_star = dual.zeta_star;
  out.primal_objective = primal.primal_objective;
  out.dual_objective = dual.dual_objective;
  out.duality_gap = std::fabs(out.primal_objective - out.dual_objective);
  out.iterations = primal.iterations + dual.iterations;
  out.negative_zeta_count = dual.negative_zeta_count;
  return out;
}

LpSolution duality_gap_report(const TabularMdp& mdp, const OfflineDataset& dataset,
                              const FlexF& flex, double alpha_g, LpMode lp_mode,
                              const SolveOptions& opts) {
  return duality_gap_report(mdp, empirical_weights(dataset, mdp), flex, alpha_g, lp_mode,
                            opts);
}

void write_oracle_report(const std::vector<OracleReportRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_oracle_report: cannot write " + path);
  out << "instance,divergence,alpha_g,primal,dual,gap,iterations\n";
  char buf[160];
  for (const OracleReportRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%.17g,%.17g,%.17g,%ld", r.instance.c_str(),
                  r.divergence.c_str(), r.alpha_g, r.primal, r.dual, r.gap, r.iterations);
    out << buf << '\n';
  }
}

}  // namespace flexrl
