#pragma once

#include <map>
#include <string>
#include <vector>

#include "flexrl/errors.hpp"

namespace flexrl {

/// Flat key = value configuration text: one pair per line, '#' comments,
/// blank lines ignored. Later duplicate keys win.
std::map<std::string, std::string> read_config_file(const std::string& path);

/// One aggregated experiment outcome. Rows are uniquely keyed by
/// (env, mixture, algorithm, divergence, seed).
struct ResultRow {
  std::string env;
  std::string mixture;
  std::string algorithm;
  std::string divergence;
  std::uint64_t seed = 0;
  double final_norm_return = 0.0;
  double mean_over_seeds = 0.0;
  double std_over_seeds = 0.0;
};

std::vector<ResultRow> read_results_csv(const std::string& path);  // empty if absent

/// Appends rows, keeping the file append-only: an existing key is rejected
/// unless allow_overwrite is set, in which case the row is replaced.
void append_results(const std::string& path, const std::vector<ResultRow>& rows,
                    bool allow_overwrite);

/// Output root: FLEXRL_OUT when set, else the given fallback.
std::string output_root(const std::string& fallback = ".");

}  // namespace flexrl
