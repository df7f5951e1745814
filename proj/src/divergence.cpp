#include "flexrl/divergence.hpp"

#include <cmath>
#include <sstream>

namespace flexrl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const Interval kAllReals{-kInf, kInf, false, false};
const Interval kZetaKl{0.0, kInf, true, false};
const Interval kZetaRkl{0.0, kInf, false, false};
const Interval kZetaHellinger{0.0, kInf, true, false};
const Interval kZetaLeCam{-1.0, kInf, false, false};
const Interval kERkl{-kInf, 1.0, false, false};
const Interval kEHellinger{-kInf, 0.5, false, false};
const Interval kELeCam{-kInf, 0.25, false, true};

[[noreturn]] void domain_fail(std::string_view fn, std::string_view name, double x,
                              const Interval& dom) {
  std::ostringstream os;
  os << fn << ": argument " << x << " outside " << name << " domain " << dom.str();
  throw DomainError(os.str());
}

}  // namespace

DivergenceFn DivergenceFn::from_name(std::string_view name) {
  for (const auto& d : catalog()) {
    if (d.name() == name) return d;
  }
  throw UnknownPreset("unknown divergence name: " + std::string(name));
}

const std::array<DivergenceFn, 5>& DivergenceFn::catalog() {
  static const std::array<DivergenceFn, 5> cat = {
      DivergenceFn::chi2(), DivergenceFn::kl(), DivergenceFn::reverse_kl(),
      DivergenceFn::hellinger(), DivergenceFn::le_cam()};
  return cat;
}

std::string_view DivergenceFn::name() const {
  switch (kind_) {
    case BaseKind::Chi2: return "chi2";
    case BaseKind::Kl: return "kl";
    case BaseKind::ReverseKl: return "reverse_kl";
    case BaseKind::Hellinger: return "hellinger";
    case BaseKind::LeCam: return "le_cam";
  }
  return "?";
}

const Interval& DivergenceFn::zeta_domain() const {
  switch (kind_) {
    case BaseKind::Chi2: return kAllReals;
    case BaseKind::Kl: return kZetaKl;
    case BaseKind::ReverseKl: return kZetaRkl;
    case BaseKind::Hellinger: return kZetaHellinger;
    case BaseKind::LeCam: return kZetaLeCam;
  }
  return kAllReals;
}

const Interval& DivergenceFn::e_domain() const {
  switch (kind_) {
    case BaseKind::Chi2:
    case BaseKind::Kl: return kAllReals;
    case BaseKind::ReverseKl: return kERkl;
    case BaseKind::Hellinger: return kEHellinger;
    case BaseKind::LeCam: return kELeCam;
  }
  return kAllReals;
}

double DivergenceFn::gstar(double zeta) const {
  if (!zeta_domain().contains(zeta)) domain_fail("gstar", name(), zeta, zeta_domain());
  switch (kind_) {
    case BaseKind::Chi2: return 0.5 * (zeta - 1.0) * (zeta - 1.0);
    case BaseKind::Kl:
      if (zeta == 0.0) return 1.0;  // limit of z ln z - z + 1
      return zeta * std::log(zeta) - zeta + 1.0;
    case BaseKind::ReverseKl: return -std::log(zeta) + zeta - 1.0;
    case BaseKind::Hellinger: {
      double t = std::sqrt(zeta) - 1.0;
      return 0.5 * t * t;
    }
    case BaseKind::LeCam:
      return (1.0 - zeta) / (2.0 * (zeta + 1.0)) + 0.25 * (zeta - 1.0);
  }
  return 0.0;
}

double DivergenceFn::gstar_prime(double zeta) const {
  if (!zeta_domain().interior_contains(zeta))
    domain_fail("gstar_prime", name(), zeta, zeta_domain());
  switch (kind_) {
    case BaseKind::Chi2: return zeta - 1.0;
    case BaseKind::Kl: return std::log(zeta);
    case BaseKind::ReverseKl: return 1.0 - 1.0 / zeta;
    case BaseKind::Hellinger: return 0.5 * (std::sqrt(zeta) - 1.0) / std::sqrt(zeta);
    case BaseKind::LeCam: {
      double t = zeta + 1.0;
      return -1.0 / (t * t) + 0.25;
    }
  }
  return 0.0;
}

double DivergenceFn::gstar_second(double zeta) const {
  if (!zeta_domain().interior_contains(zeta))
    domain_fail("gstar_second", name(), zeta, zeta_domain());
  switch (kind_) {
    case BaseKind::Chi2: return 1.0;
    case BaseKind::Kl: return 1.0 / zeta;
    case BaseKind::ReverseKl: return 1.0 / (zeta * zeta);
    case BaseKind::Hellinger: return 0.25 * std::pow(zeta, -1.5);
    case BaseKind::LeCam: {
      double t = zeta + 1.0;
      return 2.0 / (t * t * t);
    }
  }
  return 0.0;
}

double DivergenceFn::gstar_prime_inv(double e) const {
  if (!e_domain().interior_contains(e))
    domain_fail("gstar_prime_inv", name(), e, e_domain());
  switch (kind_) {
    case BaseKind::Chi2: return e + 1.0;
    case BaseKind::Kl: return std::exp(e);
    case BaseKind::ReverseKl: return 1.0 / (1.0 - e);
    case BaseKind::Hellinger: {
      double t = 1.0 / (1.0 - 2.0 * e);
      return t * t;
    }
    case BaseKind::LeCam: return 2.0 / std::sqrt(1.0 - 4.0 * e) - 1.0;
  }
  return 0.0;
}

double DivergenceFn::g(double e) const {
  if (!e_domain().contains(e)) domain_fail("g", name(), e, e_domain());
  switch (kind_) {
    case BaseKind::Chi2: return 0.5 * e * e + e;
    case BaseKind::Kl: return std::exp(e) - 1.0;
    case BaseKind::ReverseKl: return -std::log(1.0 - e);
    case BaseKind::Hellinger: return e / (1.0 - 2.0 * e);
    case BaseKind::LeCam: return 1.0 - e - std::sqrt(1.0 - 4.0 * e);
  }
  return 0.0;
}

FlexF FlexF::from_base(const DivergenceFn& base) {
  // Identical branches joined at 1: the correction vanishes and both branches
  // evaluate to the base everywhere.
  return compose_flex(base, base, 1.0, 1.0, 1.0);
}

Interval FlexF::zeta_domain() const {
  const Interval& lo_side = g_minus.zeta_domain();
  const Interval& hi_side = g_plus.zeta_domain();
  Interval out;
  out.lo = lo_side.lo;
  out.lo_closed = lo_side.lo_closed;
  out.hi = hi_side.hi;
  out.hi_closed = hi_side.hi_closed;
  return out;
}

Interval FlexF::e_domain() const {
  // The minus branch covers e below beta_e; every catalog base has
  // g*' -> -inf at its lower zeta limit, so the lower side is unbounded. The
  // upper side is limited by the plus branch conjugate domain.
  const Interval& up = g_plus.e_domain();
  Interval out;
  out.lo = -kInf;
  out.lo_closed = false;
  if (up.hi_finite()) {
    out.hi = alpha_plus * up.hi + (beta >= 1.0 ? k_g : 0.0);
    out.hi_closed = up.hi_closed;
  }
  return out;
}

double FlexF::minus_branch_gstar(double zeta) const {
  double v = alpha_minus * g_minus.gstar(zeta);
  if (corrected_branch_is_minus()) v -= k_g * zeta + c_g;
  return v;
}

double FlexF::plus_branch_gstar(double zeta) const {
  double v = alpha_plus * g_plus.gstar(zeta);
  if (!corrected_branch_is_minus()) v += k_g * zeta + c_g;
  return v;
}

double FlexF::minus_branch_prime(double zeta) const {
  double v = alpha_minus * g_minus.gstar_prime(zeta);
  if (corrected_branch_is_minus()) v -= k_g;
  return v;
}

double FlexF::plus_branch_prime(double zeta) const {
  double v = alpha_plus * g_plus.gstar_prime(zeta);
  if (!corrected_branch_is_minus()) v += k_g;
  return v;
}

double FlexF::gstar(double zeta) const {
  return zeta < beta ? minus_branch_gstar(zeta) : plus_branch_gstar(zeta);
}

double FlexF::gstar_prime(double zeta) const {
  return zeta < beta ? minus_branch_prime(zeta) : plus_branch_prime(zeta);
}

double FlexF::gstar_second(double zeta) const {
  return zeta < beta ? alpha_minus * g_minus.gstar_second(zeta)
                     : alpha_plus * g_plus.gstar_second(zeta);
}

double FlexF::gstar_prime_inv(double e) const {
  if (!e_domain().interior_contains(e))
    domain_fail("gstar_prime_inv", describe(), e, e_domain());
  if (e < beta_e) {
    double u = (e + (corrected_branch_is_minus() ? k_g : 0.0)) / alpha_minus;
    return g_minus.gstar_prime_inv(u);
  }
  double u = (e - (corrected_branch_is_minus() ? 0.0 : k_g)) / alpha_plus;
  return g_plus.gstar_prime_inv(u);
}

double FlexF::g(double e) const {
  // Analytic conjugate through the branch bases:
  //   e >= beta_e:  alpha_+ g_+((e - 1[beta>=1] k_g)/alpha_+) - 1[beta>=1] c_g
  //   e <  beta_e:  alpha_- g_-((e + 1[beta<1] k_g)/alpha_-) + 1[beta<1] c_g
  if (!e_domain().contains(e)) domain_fail("g", describe(), e, e_domain());
  if (e < beta_e) {
    double u = (e + (corrected_branch_is_minus() ? k_g : 0.0)) / alpha_minus;
    return alpha_minus * g_minus.g(u) + (corrected_branch_is_minus() ? c_g : 0.0);
  }
  double u = (e - (corrected_branch_is_minus() ? 0.0 : k_g)) / alpha_plus;
  return alpha_plus * g_plus.g(u) - (corrected_branch_is_minus() ? 0.0 : c_g);
}

std::string FlexF::describe() const {
  std::ostringstream os;
  os << "flex(" << g_minus.name() << "," << g_plus.name() << ",a-=" << alpha_minus
     << ",a+=" << alpha_plus << ",b=" << beta << ")";
  return os.str();
}

FlexF compose_flex(const DivergenceFn& g_minus, const DivergenceFn& g_plus,
                   double alpha_minus, double alpha_plus, double beta) {
  if (!(alpha_minus > 0.0) || !(alpha_plus > 0.0))
    throw InvalidThreshold("compose_flex: alphas must be positive");
  if (!g_minus.zeta_domain().interior_contains(beta))
    throw InvalidThreshold("compose_flex: beta " + std::to_string(beta) +
                           " outside the interior of the " +
                           std::string(g_minus.name()) + " zeta domain");
  if (!g_plus.zeta_domain().interior_contains(beta))
    throw InvalidThreshold("compose_flex: beta " + std::to_string(beta) +
                           " outside the interior of the " +
                           std::string(g_plus.name()) + " zeta domain");
  // Catalog bases are strictly convex; sample the derivative to guard against
  // a future non-monotone branch slipping in.
  for (const DivergenceFn* d : {&g_minus, &g_plus}) {
    double a = d->zeta_domain().clamp_interior(0.2, 1e-6);
    double b = d->zeta_domain().clamp_interior(1.0, 1e-6);
    double c = d->zeta_domain().clamp_interior(4.0, 1e-6);
    if (!(d->gstar_prime(a) < d->gstar_prime(b) && d->gstar_prime(b) < d->gstar_prime(c)))
      throw NonInvertible(std::string(d->name()) + ": derivative not strictly increasing");
  }

  FlexF f;
  f.g_minus = g_minus;
  f.g_plus = g_plus;
  f.alpha_minus = alpha_minus;
  f.alpha_plus = alpha_plus;
  f.beta = beta;
  const double dm = g_minus.gstar_prime(beta);
  const double dp = g_plus.gstar_prime(beta);
  f.k_g = alpha_minus * dm - alpha_plus * dp;
  f.c_g = alpha_minus * g_minus.gstar(beta) - alpha_plus * g_plus.gstar(beta) - beta * f.k_g;
  // The uncorrected branch carries the conjugate-side threshold.
  f.beta_e = beta >= 1.0 ? alpha_minus * dm : alpha_plus * dp;
  return f;
}

std::string_view lp_mode_name(LpMode mode) {
  switch (mode) {
    case LpMode::InitDist: return "init_dist";
    case LpMode::UniformValue: return "uniform_value";
    case LpMode::NegTdError: return "neg_td_error";
    case LpMode::NegEstimatedTd: return "neg_estimated_td";
  }
  return "?";
}

LpMode lp_mode_from_name(std::string_view name) {
  if (name == "init_dist") return LpMode::InitDist;
  if (name == "uniform_value") return LpMode::UniformValue;
  if (name == "neg_td_error") return LpMode::NegTdError;
  if (name == "neg_estimated_td") return LpMode::NegEstimatedTd;
  throw ConfigError("unknown lp_mode: " + std::string(name));
}

double bellman_loss(const LossProfile& profile, double e) {
  double ge = profile.flex.g(e);
  if (profile.lp_mode == LpMode::NegTdError || profile.lp_mode == LpMode::NegEstimatedTd)
    return -e + ge;
  return ge;
}

FlexF preset(std::string_view name) {
  if (name == "soft_chi2")
    return compose_flex(DivergenceFn::kl(), DivergenceFn::chi2(), 1.0, 1.0, 1.0);
  if (name == "relax_dice")
    return compose_flex(DivergenceFn::kl(), DivergenceFn::kl(), 1.0, 2.0, 1.0);
  if (name == "xql")
    return compose_flex(DivergenceFn::kl(), DivergenceFn::kl(), 1.0, 1.0, 1.0);
  throw UnknownPreset("unknown preset: " + std::string(name) +
                      " (parameterized presets: iql(tau), porel_dice(eps))");
}

FlexF preset_iql(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw UnknownPreset("iql: tau must be in (0,1)");
  return compose_flex(DivergenceFn::chi2(), DivergenceFn::chi2(), 1.0 / (1.0 - tau),
                      1.0 / tau, 1.0);
}

FlexF preset_porel_dice(double eps) {
  if (!(eps > 0.0)) throw UnknownPreset("porel_dice: eps must be positive");
  return compose_flex(DivergenceFn::le_cam(), DivergenceFn::chi2(), eps, 1.0, 1.0);
}

FlexF preset_from_spec(std::string_view spec) {
  auto open = spec.find('(');
  if (open == std::string_view::npos) return preset(spec);
  auto close = spec.find(')', open);
  if (close == std::string_view::npos)
    throw UnknownPreset("malformed preset spec: " + std::string(spec));
  std::string name(spec.substr(0, open));
  double arg = std::stod(std::string(spec.substr(open + 1, close - open - 1)));
  if (name == "iql") return preset_iql(arg);
  if (name == "porel_dice") return preset_porel_dice(arg);
  throw UnknownPreset("unknown parameterized preset: " + name);
}

double beta_from_zero_threshold(const DivergenceFn& g_minus,
                                const DivergenceFn& g_plus, double alpha_minus,
                                double alpha_plus, double e) {
  // Composition thresholded at zeta = 0 (< 1), so the minus branch carries
  // the correction and beta_e = alpha_+ g*_+'(0), taken as a limit when 0 is
  // not interior to the plus branch domain.
  const Interval& zp = g_plus.zeta_domain();
  double dp0 = zp.interior_contains(0.0) ? g_plus.gstar_prime(0.0) : -kInf;
  double beta_e0 = alpha_plus * dp0;
  if (e >= beta_e0) {
    double u = e / alpha_plus;
    if (!g_plus.e_domain().interior_contains(u))
      domain_fail("beta_from_zero_threshold", g_plus.name(), u, g_plus.e_domain());
    return g_plus.gstar_prime_inv(u);
  }
  const Interval& zm = g_minus.zeta_domain();
  double dm0 = zm.interior_contains(0.0) ? g_minus.gstar_prime(0.0) : -kInf;
  double k0 = alpha_minus * dm0 - beta_e0;
  if (!std::isfinite(k0))
    throw DomainError("beta_from_zero_threshold: zeta = 0 outside both branch domains");
  double u = (e + k0) / alpha_minus;
  if (!g_minus.e_domain().interior_contains(u))
    domain_fail("beta_from_zero_threshold", g_minus.name(), u, g_minus.e_domain());
  return g_minus.gstar_prime_inv(u);
}

}  // namespace flexrl
