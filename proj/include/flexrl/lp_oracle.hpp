#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flexrl/dataset.hpp"
#include "flexrl/divergence.hpp"
#include "flexrl/mdp.hpp"

namespace flexrl {

/// Synchronous value iteration until the sup-norm Bellman residual is <= tol.
std::vector<double> value_iteration(const TabularMdp& mdp, double tol,
                                    long max_sweeps = 2000000);

/// Expected-return anchors for min-max normalization.
struct ReturnAnchors {
  double r_random = 0.0;  // E_p0[V] of the uniform policy
  double r_opt = 0.0;     // E_p0[V*]
};
ReturnAnchors return_anchors(const TabularMdp& mdp);
double expected_return(const TabularMdp& mdp, const TabularPolicy& policy);
double normalized_return(const ReturnAnchors& anchors, double ret);

/// Ground-truth solution of the divergence-regularized problem pair.
struct LpSolution {
  std::vector<double> nu_star;    // n_states
  std::vector<double> zeta_star;  // n_states * n_actions; 0 off support
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double duality_gap = 0.0;
  long iterations = 0;
  int negative_zeta_count = 0;  // negative ratios allowed; frequency reported
};

struct SolveOptions {
  double grad_tol = 1e-8;       // sup-norm stationarity for the nu solve
  double flow_tol = 1e-8;       // sup-norm residual for the dual solve
  long max_iterations = 20000;  // step budget per solve
  bool clip_to_domain = false;  // clamp e/alpha_g into the conjugate domain
};

/// Per-state Bellman occupancy residual of zeta under empirical weighting:
///   e_zeta(s) = sum_a w(s,a) zeta(s,a) - alpha(s) - gamma (T_* (w zeta))(s).
std::vector<double> occupancy_residual(const TabularMdp& mdp,
                                       const std::vector<double>& weights,
                                       const std::vector<double>& zeta,
                                       LpMode lp_mode = LpMode::InitDist);
std::vector<double> occupancy_residual(const TabularMdp& mdp, const OfflineDataset& dataset,
                                       const std::vector<double>& zeta,
                                       LpMode lp_mode = LpMode::InitDist);

/// Minimize sum_s alpha(s) nu(s) + alpha_g sum_sa w(s,a) g(e_nu/alpha_g) over
/// tabular nu (negative-TD modes fold the linear term into -e + g(e)).
/// Damped-Newton directions under a backtracking line search; deterministic.
LpSolution solve_regularized_nu(const TabularMdp& mdp, const std::vector<double>& weights,
                                const FlexF& flex, LpMode lp_mode, double alpha_g,
                                const SolveOptions& opts = {});
LpSolution solve_regularized_nu(const TabularMdp& mdp, const OfflineDataset& dataset,
                                const FlexF& flex, LpMode lp_mode, double alpha_g,
                                const SolveOptions& opts = {});

/// Maximize sum_sa w(s,a)[zeta r - alpha_g g*(zeta)] subject to the hard flow
/// constraint e_zeta = 0, by quadratic penalty with increasing weight and
/// multiplier carry-over. Instances limited to 256 state-action pairs.
LpSolution solve_regularized_dual(const TabularMdp& mdp, const std::vector<double>& weights,
                                  const FlexF& flex, double alpha_g,
                                  LpMode lp_mode = LpMode::InitDist,
                                  const SolveOptions& opts = {});
LpSolution solve_regularized_dual(const TabularMdp& mdp, const OfflineDataset& dataset,
                                  const FlexF& flex, double alpha_g,
                                  LpMode lp_mode = LpMode::InitDist,
                                  const SolveOptions& opts = {});

/// Runs both solvers independently and reports the cross-solver gap.
LpSolution duality_gap_report(const TabularMdp& mdp, const std::vector<double>& weights,
                              const FlexF& flex, double alpha_g,
                              LpMode lp_mode = LpMode::InitDist,
                              const SolveOptions& opts = {});
LpSolution duality_gap_report(const TabularMdp& mdp, const OfflineDataset& dataset,
                              const FlexF& flex, double alpha_g,
                              LpMode lp_mode = LpMode::InitDist,
                              const SolveOptions& opts = {});

/// One row of the oracle_report.csv emitted by the check harness.
struct OracleReportRow {
  std::string instance;
  std::string divergence;
  double alpha_g = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  long iterations = 0;
};
void write_oracle_report(const std::vector<OracleReportRow>& rows, const std::string& path);

}  // namespace flexrl
