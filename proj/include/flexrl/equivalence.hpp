#pragma once

#include "flexrl/divergence.hpp"

namespace flexrl {

/// Closed-form value losses from the literature, used as independent oracles
/// for the flexible-divergence loss machinery.
struct ReferenceLoss {
  enum class Kind { Xql, Iql, Mse };
  Kind kind = Kind::Mse;
  double tau = 0.5;  // IQL expectile, in (0,1)

  static ReferenceLoss xql() { return {Kind::Xql, 0.0}; }
  static ReferenceLoss iql(double tau);
  static ReferenceLoss mse() { return {Kind::Mse, 0.0}; }
};

/// xql: exp(e)-e-1; iql(tau): tau e^2/2 for e>=0 else (1-tau) e^2/2
/// (the 1/2-normalized expectile form); mse: e^2/2.
double reference_loss(const ReferenceLoss& ref, double e);

/// Max |reference_loss - bellman_loss(neg_td_error)| over a uniform grid.
double verify_equivalence(const ReferenceLoss& ref, const FlexF& flex,
                          double grid_lo, double grid_hi, int n_points);

}  // namespace flexrl
