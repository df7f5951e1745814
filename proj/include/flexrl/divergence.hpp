#pragma once

#include <array>
#include <string>
#include <string_view>

#include "flexrl/errors.hpp"
#include "flexrl/interval.hpp"

namespace flexrl {

enum class BaseKind { Chi2, Kl, ReverseKl, Hellinger, LeCam };

/// One base f-divergence generator g*(zeta) together with its Fenchel
/// conjugate g(e), derivative, second derivative and inverse derivative,
/// all in closed form. Every catalog entry satisfies g*(1) = 0 and
/// g*'(1) = 0, so the induced loss -e + g(e) is minimized at e = 0.
///
/// Closed forms:
///   chi2:        g* = (z-1)^2/2            g = e^2/2 + e        (e in R)
///   kl:          g* = z ln z - z + 1       g = exp(e) - 1       (e in R)
///   reverse_kl:  g* = -ln z + z - 1        g = -ln(1-e)         (e < 1)
///   hellinger:   g* = (sqrt z - 1)^2/2     g = e/(1-2e)         (e < 1/2)
///   le_cam:      g* = (1-z)/(2(z+1))+(z-1)/4
///                                          g = 1 - e - sqrt(1-4e)  (e <= 1/4)
class DivergenceFn {
 public:
  static DivergenceFn chi2() { return DivergenceFn(BaseKind::Chi2); }
  static DivergenceFn kl() { return DivergenceFn(BaseKind::Kl); }
  static DivergenceFn reverse_kl() { return DivergenceFn(BaseKind::ReverseKl); }
  static DivergenceFn hellinger() { return DivergenceFn(BaseKind::Hellinger); }
  static DivergenceFn le_cam() { return DivergenceFn(BaseKind::LeCam); }

  /// Lookup by identifier (chi2, kl, reverse_kl, hellinger, le_cam).
  static DivergenceFn from_name(std::string_view name);
  static const std::array<DivergenceFn, 5>& catalog();

  BaseKind kind() const { return kind_; }
  std::string_view name() const;

  const Interval& zeta_domain() const;
  const Interval& e_domain() const;

  double gstar(double zeta) const;
  /// Derivative g*'(zeta); defined on the interior of zeta_domain.
  double gstar_prime(double zeta) const;
  double gstar_second(double zeta) const;
  /// Inverse of g*'; defined on the interior of e_domain.
  double gstar_prime_inv(double e) const;
  /// Fenchel conjugate; a closed e_domain endpoint returns the limit value.
  double g(double e) const;

  bool operator==(const DivergenceFn& o) const { return kind_ == o.kind_; }

 private:
  explicit DivergenceFn(BaseKind k) : kind_(k) {}
  BaseKind kind_;
};

/// Flexible composition of two scaled bases joined at zeta = beta with a
/// linear correction (k_g, c_g) that keeps g* and g*' continuous across the
/// join. The correction is applied to the minus branch when beta < 1 and to
/// the plus branch when beta >= 1, so the branch containing zeta = 1 keeps
/// g*(1) = 0.
struct FlexF {
  DivergenceFn g_minus = DivergenceFn::chi2();
  DivergenceFn g_plus = DivergenceFn::chi2();
  double alpha_minus = 1.0;
  double alpha_plus = 1.0;
  double beta = 1.0;

  // Derived:
  double k_g = 0.0;    // alpha_- g*_-'(beta) - alpha_+ g*_+'(beta)
  double c_g = 0.0;    // alpha_- g*_-(beta) - alpha_+ g*_+(beta) - beta k_g
  double beta_e = 0.0; // conjugate-side threshold, g*'(beta) of the composition

  /// A base divergence viewed as a degenerate composition (identical branches).
  static FlexF from_base(const DivergenceFn& base);

  bool corrected_branch_is_minus() const { return beta < 1.0; }

  Interval zeta_domain() const;
  Interval e_domain() const;

  double gstar(double zeta) const;
  double gstar_prime(double zeta) const;
  double gstar_second(double zeta) const;
  double gstar_prime_inv(double e) const;
  double g(double e) const;

  // One-sided branch expressions evaluated at an arbitrary point; used by the
  // continuity checks and plots.
  double minus_branch_gstar(double zeta) const;
  double plus_branch_gstar(double zeta) const;
  double minus_branch_prime(double zeta) const;
  double plus_branch_prime(double zeta) const;

  std::string describe() const;
};

/// Build the composition, deriving k_g, c_g and beta_e. beta must lie in the
/// interior of both branch zeta-domains.
FlexF compose_flex(const DivergenceFn& g_minus, const DivergenceFn& g_plus,
                   double alpha_minus, double alpha_plus, double beta);

/// The primal linear term options admitted for L_P.
enum class LpMode { InitDist, UniformValue, NegTdError, NegEstimatedTd };

std::string_view lp_mode_name(LpMode mode);
LpMode lp_mode_from_name(std::string_view name);

struct LossProfile {
  FlexF flex;
  LpMode lp_mode = LpMode::NegTdError;
};

/// Per-sample loss induced by the profile: -e + g(e) for the negative-TD
/// modes, g(e) alone otherwise (the linear term is assembled by the trainer).
double bellman_loss(const LossProfile& profile, double e);

/// Named special cases: soft_chi2, relax_dice, xql (parameter-free) plus
/// iql(tau) and porel_dice(eps).
FlexF preset(std::string_view name);
FlexF preset_iql(double tau);
FlexF preset_porel_dice(double eps);
/// Parse "iql(0.7)" / "porel_dice(0.5)" / bare names.
FlexF preset_from_spec(std::string_view spec);

/// The adaptive-parameter beta formula: the inverse derivative of the
/// composition re-thresholded at zeta = 0 (subscript alpha_pm, 0), evaluated
/// at e. Only needs the plus branch unless e falls below alpha_+ g*_+'(0).
double beta_from_zero_threshold(const DivergenceFn& g_minus,
                                const DivergenceFn& g_plus,
                                double alpha_minus, double alpha_plus,
                                double e);

}  // namespace flexrl
