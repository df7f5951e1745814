#pragma once

#include <string>
#include <vector>

#include "flexrl/divergence.hpp"
#include "flexrl/lp_oracle.hpp"
#include "flexrl/rng.hpp"

namespace flexrl {

/// Outcome of one verification suite (the release-gate checks behind
/// `flexrl check`).
struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct CheckOptions {
  std::uint64_t seed = 2024;
  int conjugacy_flex_draws = 20;
  int conjugacy_grid_points = 100;
  int loss_shape_flex_draws = 20;
  int continuity_draws = 1000;
  int duality_instances = 20;
  int max_size = 64;  // state-action pair cap for duality instances
  int perf_diff_triples = 100;
};

/// Random valid composition over the full base catalog.
FlexF random_flex(Rng& rng);

/// Max |closed-form g - numeric supremum of e z - g*(z)| over an interior
/// e-grid; grid_gap receives the coarse dense-grid variant when non-null.
double conjugacy_max_gap(const FlexF& flex, int n_points, double* grid_gap = nullptr);

/// One line of the pass/fail table emitted by `flexrl check` for the
/// equivalence suite.
struct EquivalenceRow {
  std::string reference;
  std::string flex;
  double max_gap = 0.0;
  bool passed = false;
};
void write_equivalence_report(const std::vector<EquivalenceRow>& rows,
                              const std::string& path);

SuiteResult run_conjugacy_suite(const CheckOptions& opts);
SuiteResult run_continuity_suite(const CheckOptions& opts);
SuiteResult run_loss_shape_suite(const CheckOptions& opts);
SuiteResult run_duality_suite(const CheckOptions& opts,
                              std::vector<OracleReportRow>* report = nullptr);
SuiteResult run_perf_diff_suite(const CheckOptions& opts);
SuiteResult run_equivalence_suite(const CheckOptions& opts,
                                  std::vector<EquivalenceRow>* table = nullptr);

std::vector<SuiteResult> run_suites(const std::vector<std::string>& names,
                                    const CheckOptions& opts,
                                    std::vector<OracleReportRow>* report = nullptr,
                                    std::vector<EquivalenceRow>* equivalence_table = nullptr);

}  // namespace flexrl
