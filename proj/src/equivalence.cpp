#include "flexrl/equivalence.hpp"

#include <cmath>

namespace flexrl {

ReferenceLoss ReferenceLoss::iql(double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw ConfigError("ReferenceLoss::iql: tau must be in (0,1)");
  return {Kind::Iql, tau};
}

double reference_loss(const ReferenceLoss& ref, double e) {
  switch (ref.kind) {
    case ReferenceLoss::Kind::Xql: return std::exp(e) - e - 1.0;
    case ReferenceLoss::Kind::Iql:
      return (e >= 0.0 ? ref.tau : 1.0 - ref.tau) * 0.5 * e * e;
    case ReferenceLoss::Kind::Mse: return 0.5 * e * e;
  }
  return 0.0;
}

double verify_equivalence(const ReferenceLoss& ref, const FlexF& flex,
                          double grid_lo, double grid_hi, int n_points) {
  const Interval dom = flex.e_domain();
  LossProfile profile{flex, LpMode::NegTdError};
  double max_diff = 0.0;
  for (int i = 0; i < n_points; ++i) {
    double e = grid_lo + (grid_hi - grid_lo) * i / (n_points - 1);
    if (!dom.contains(e))
      throw DomainError("verify_equivalence: grid point " + std::to_string(e) +
                        " outside conjugate domain " + dom.str());
    double diff = std::fabs(reference_loss(ref, e) - bellman_loss(profile, e));
    if (diff > max_diff) max_diff = diff;
  }
  return max_diff;
}

}  // namespace flexrl
