#include "flexrl/checks.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "flexrl/equivalence.hpp"

namespace flexrl {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Dense scan with window expansion plus golden-section refinement; the
// verification mirror of the closed-form conjugate.
double numeric_supremum(const FlexF& flex, double e, double* grid_value) {
  const Interval zdom = flex.zeta_domain();
  auto h = [&](double z) -> double {
    if (!zdom.contains(z)) return -1e308;
    double v = e * z - flex.gstar(z);
    return std::isfinite(v) ? v : -1e308;
  };
  double lo = zdom.lo_finite() ? zdom.lo + 1e-9 : -8.0;
  double hi = zdom.hi_finite() ? zdom.hi - 1e-9 : 8.0;
  const int n = 4001;
  double best = -1e308, arg = lo;
  int best_idx = 0;
  auto scan = [&](double a, double b) {
    for (int i = 0; i < n; ++i) {
      double z = a + (b - a) * i / (n - 1);
      double v = h(z);
      if (v > best) {
        best = v;
        arg = z;
        best_idx = i;
      }
    }
    return b - a;
  };
  double width = scan(lo, hi);
  for (int round = 0; round < 40; ++round) {
    if (best_idx >= n - 2 && !zdom.hi_finite() && hi < 1e12) {
      lo = arg - width / n;
      hi = hi * 4.0 + 4.0;
      width = scan(lo, hi);
    } else if (best_idx <= 1 && !zdom.lo_finite() && lo > -1e12) {
      hi = arg + width / n;
      lo = lo * 4.0 - 4.0;
      width = scan(lo, hi);
    } else {
      break;
    }
  }
  double step = width / (n - 1);
  for (int zoom = 0; zoom < 2; ++zoom) {
    double a = arg - step, b = arg + step;
    if (zdom.lo_finite() && a < zdom.lo) a = zdom.lo + 1e-13;
    step = scan(a, b) / (n - 1);
  }
  if (grid_value) *grid_value = best;

  // Golden-section refinement around the grid argmax.
  double a = arg - step, b = arg + step;
  if (zdom.lo_finite() && a < zdom.lo) a = zdom.lo + 1e-13;
  const double phi = 0.6180339887498949;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = h(x1), f2 = h(x2);
  while (b - a > 1e-14 * (1.0 + std::fabs(a) + std::fabs(b))) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = h(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = h(x1);
    }
  }
  return std::max(best, h(0.5 * (a + b)));
}

void e_window(const Interval& dom, double& lo, double& hi) {
  lo = dom.lo_finite() ? dom.lo + 1e-3 : -3.0;
  hi = dom.hi_finite() ? dom.hi - 1e-3 : 3.0;
}

std::string describe_fail(const FlexF& f, double x, double got, double bound,
                          const char* what) {
  std::ostringstream os;
  os << f.describe() << " " << what << " at " << x << ": " << got << " > " << bound;
  return os.str();
}

}  // namespace

FlexF random_flex(Rng& rng) {
  const auto& cat = DivergenceFn::catalog();
  for (;;) {
    const DivergenceFn& gm = cat[rng.uniform_int(cat.size())];
    const DivergenceFn& gp = cat[rng.uniform_int(cat.size())];
    double am = std::exp(rng.uniform(std::log(0.3), std::log(3.0)));
    double ap = std::exp(rng.uniform(std::log(0.3), std::log(3.0)));
    double beta = rng.uniform(0.05, 3.0);
    if (!gm.zeta_domain().interior_contains(beta)) continue;
    if (!gp.zeta_domain().interior_contains(beta)) continue;
    return compose_flex(gm, gp, am, ap, beta);
  }
}

double conjugacy_max_gap(const FlexF& flex, int n_points, double* grid_gap) {
  double lo, hi;
  e_window(flex.e_domain(), lo, hi);
  double max_gap = 0.0, max_grid = 0.0;
  for (int i = 0; i < n_points; ++i) {
    double e = lo + (hi - lo) * i / (n_points - 1);
    double grid = 0.0;
    double sup = numeric_supremum(flex, e, &grid);
    double closed = flex.g(e);
    max_gap = std::max(max_gap, std::fabs(closed - sup));
    max_grid = std::max(max_grid, std::fabs(closed - grid));
  }
  if (grid_gap) *grid_gap = max_grid;
  return max_gap;
}

SuiteResult run_conjugacy_suite(const CheckOptions& opts) {
  auto t0 = Clock::now();
  SuiteResult out{"conjugacy", true, "", 0.0};
  double worst = 0.0;

  // Generator validity first: g*(1) = 0 and g*'(1) = 0 for the catalog.
  for (const auto& d : DivergenceFn::catalog()) {
    if (std::fabs(d.gstar(1.0)) > 1e-12 || std::fabs(d.gstar_prime(1.0)) > 1e-12) {
      out.passed = false;
      out.detail = std::string(d.name()) + ": generator not normalized at 1";
      out.seconds = elapsed(t0);
      return out;
    }
  }

  Rng rng(opts.seed);
  std::vector<FlexF> fns;
  for (const auto& d : DivergenceFn::catalog()) fns.push_back(FlexF::from_base(d));
  for (int i = 0; i < opts.conjugacy_flex_draws; ++i) fns.push_back(random_flex(rng));
  for (const FlexF& f : fns) {
    double gap = conjugacy_max_gap(f, opts.conjugacy_grid_points);
    worst = std::max(worst, gap);
    if (gap > 1e-6) {
      out.passed = false;
      out.detail = describe_fail(f, 0.0, gap, 1e-6, "conjugacy gap");
      out.seconds = elapsed(t0);
      return out;
    }
  }
  std::ostringstream os;
  os << fns.size() << " functions x " << opts.conjugacy_grid_points
     << " points, worst gap " << worst;
  out.detail = os.str();
  out.seconds = elapsed(t0);
  return out;
}

SuiteResult run_continuity_suite(const CheckOptions& opts) {
  auto t0 = Clock::now();
  SuiteResult out{"continuity", true, "", 0.0};
  Rng rng(opts.seed + 1);
  double worst = 0.0;
  for (int i = 0; i < opts.continuity_draws; ++i) {
    FlexF f = random_flex(rng);
    double dv = std::fabs(f.minus_branch_gstar(f.beta) - f.plus_branch_gstar(f.beta));
    double dd = std::fabs(f.minus_branch_prime(f.beta) - f.plus_branch_prime(f.beta));
    worst = std::max(worst, std::max(dv, dd));
    if (dv > 1e-9 || dd > 1e-9) {
      out.passed = false;
      out.detail = describe_fail(f, f.beta, std::max(dv, dd), 1e-9, "join discontinuity");
      out.seconds = elapsed(t0);
      return out;
    }
  }
  std::ostringstream os;
  os << opts.continuity_draws << " draws, worst mismatch " << worst;
  out.detail = os.str();
  out.seconds = elapsed(t0);
  return out;
}

SuiteResult run_loss_shape_suite(const CheckOptions& opts) {
  auto t0 = Clock::now();
  SuiteResult out{"loss_shape", true, "", 0.0};
  Rng rng(opts.seed + 2);
  std::vector<FlexF> fns;
  for (const auto& d : DivergenceFn::catalog()) fns.push_back(FlexF::from_base(d));
  for (int i = 0; i < opts.loss_shape_flex_draws; ++i) fns.push_back(random_flex(rng));

  for (const FlexF& f : fns) {
    LossProfile p{f, LpMode::NegTdError};
    if (std::fabs(bellman_loss(p, 0.0)) > 1e-12) {
      out.passed = false;
      out.detail = f.describe() + ": loss(0) != 0";
      break;
    }
    double lo, hi;
    e_window(f.e_domain(), lo, hi);
    const double h = 1e-4;
    for (int i = 0; i <= 200; ++i) {
      double e = lo + (hi - lo) * i / 200.0;
      double v = bellman_loss(p, e);
      if (v < -1e-12) {
        out.passed = false;
        out.detail = describe_fail(f, e, v, 0.0, "negative loss");
        break;
      }
      if (e - h > lo && e + h < hi) {
        double second =
            (bellman_loss(p, e + h) - 2.0 * v + bellman_loss(p, e - h)) / (h * h);
        if (second < -1e-6) {
          out.passed = false;
          out.detail = describe_fail(f, e, second, -1e-6, "nonconvex second difference");
          break;
        }
      }
    }
    if (!out.passed) break;
  }
  if (out.passed) {
    std::ostringstream os;
    os << fns.size() << " losses checked on 201-point grids";
    out.detail = os.str();
  }
  out.seconds = elapsed(t0);
  return out;
}

SuiteResult run_duality_suite(const CheckOptions& opts,
                              std::vector<OracleReportRow>* report) {
  auto t0 = Clock::now();
  SuiteResult out{"duality", true, "", 0.0};
  Rng rng(opts.seed + 3);
  double worst = 0.0;
  long negative_zeta = 0, zeta_total = 0;
  for (int inst = 0; inst < opts.duality_instances && out.passed; ++inst) {
    int n_states = 2 + static_cast<int>(rng.uniform_int(7));
    int max_actions = std::max(1, opts.max_size / n_states);
    int n_actions = 1 + static_cast<int>(rng.uniform_int(std::min(4, max_actions)));
    TabularMdp mdp =
        make_random_mdp(n_states, n_actions, opts.seed * 1000 + inst, 0.6 + 0.3 * rng.uniform01());
    std::vector<double> w(mdp.sa_count());
    double sum = 0.0;
    for (double& x : w) {
      x = rng.uniform(0.2, 1.0);
      sum += x;
    }
    for (double& x : w) x /= sum;

    for (const auto& base : {DivergenceFn::chi2(), DivergenceFn::kl()}) {
      for (double alpha_g : {0.1, 1.0}) {
        LpSolution rep = duality_gap_report(mdp, w, FlexF::from_base(base), alpha_g);
        worst = std::max(worst, rep.duality_gap);
        negative_zeta += rep.negative_zeta_count;
        zeta_total += mdp.sa_count();
        if (report) {
          OracleReportRow row;
          row.instance = "rand" + std::to_string(inst) + "_s" + std::to_string(n_states) +
                         "a" + std::to_string(n_actions);
          row.divergence = std::string(base.name());
          row.alpha_g = alpha_g;
          row.primal = rep.primal_objective;
          row.dual = rep.dual_objective;
          row.gap = rep.duality_gap;
          row.iterations = rep.iterations;
          report->push_back(row);
        }
        if (rep.duality_gap > 1e-5) {
          out.passed = false;
          std::ostringstream os;
          os << "instance " << inst << " " << base.name() << " alpha_g=" << alpha_g
             << ": gap " << rep.duality_gap;
          out.detail = os.str();
          break;
        }
      }
      if (!out.passed) break;
    }
  }
  if (out.passed) {
    std::ostringstream os;
    os << opts.duality_instances << " instances x {chi2,kl} x {0.1,1}, worst gap " << worst
       << "; negative zeta* " << negative_zeta << "/" << zeta_total;
    out.detail = os.str();
  }
  out.seconds = elapsed(t0);
  return out;
}

SuiteResult run_perf_diff_suite(const CheckOptions& opts) {
  auto t0 = Clock::now();
  SuiteResult out{"perfdiff", true, "", 0.0};
  Rng rng(opts.seed + 4);
  double worst = 0.0;
  for (int t = 0; t < opts.perf_diff_triples; ++t) {
    TabularMdp mdp = make_random_mdp(2 + static_cast<int>(rng.uniform_int(6)),
                                     1 + static_cast<int>(rng.uniform_int(3)),
                                     opts.seed * 77 + t, 0.5 + 0.45 * rng.uniform01());
    TabularPolicy pi = random_policy(mdp, rng);
    std::vector<double> nu(mdp.n_states);
    for (double& x : nu) x = rng.uniform(-3.0, 3.0);
    double resid = std::fabs(perf_diff_check(mdp, pi, nu));
    worst = std::max(worst, resid);
    if (resid > 1e-8) {
      out.passed = false;
      out.detail = "triple " + std::to_string(t) + ": residual " + std::to_string(resid);
      break;
    }
  }
  if (out.passed) {
    std::ostringstream os;
    os << opts.perf_diff_triples << " random triples, worst residual " << worst;
    out.detail = os.str();
  }
  out.seconds = elapsed(t0);
  return out;
}

void write_equivalence_report(const std::vector<EquivalenceRow>& rows,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_equivalence_report: cannot write " + path);
  out << "reference,flex,max_gap,pass\n";
  char buf[64];
  for (const EquivalenceRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.max_gap);
    out << r.reference << ',' << r.flex << ',' << buf << ',' << (r.passed ? 1 : 0) << '\n';
  }
}

SuiteResult run_equivalence_suite(const CheckOptions& opts,
                                  std::vector<EquivalenceRow>* table) {
  (void)opts;
  auto t0 = Clock::now();
  SuiteResult out{"equivalence", true, "", 0.0};
  double worst = 0.0;
  auto record = [&](const std::string& ref, const std::string& flex, double gap,
                    double bound) {
    worst = std::max(worst, gap);
    if (table) table->push_back({ref, flex, gap, gap <= bound});
    if (gap > bound) out.passed = false;
  };
  try {
    record("xql", "preset xql",
           verify_equivalence(ReferenceLoss::xql(), preset("xql"), -2.0, 2.0, 401), 1e-10);
    for (double tau : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      std::ostringstream name;
      name << "iql(" << tau << ")";
      record(name.str(), "preset " + name.str(),
             verify_equivalence(ReferenceLoss::iql(tau), preset_iql(tau), -3.0, 3.0, 601),
             1e-10);
    }
    record("mse", "chi2",
           verify_equivalence(ReferenceLoss::mse(), FlexF::from_base(DivergenceFn::chi2()),
                              -5.0, 5.0, 801),
           1e-12);
    std::ostringstream os;
    if (!out.passed)
      os << "max pointwise gap " << worst;
    else
      os << "xql, iql(0.1..0.9), mse; max pointwise gap " << worst;
    out.detail = os.str();
  } catch (const Error& err) {
    out.passed = false;
    out.detail = err.what();
  }
  out.seconds = elapsed(t0);
  return out;
}

std::vector<SuiteResult> run_suites(const std::vector<std::string>& names,
                                    const CheckOptions& opts,
                                    std::vector<OracleReportRow>* report,
                                    std::vector<EquivalenceRow>* equivalence_table) {
  std::vector<SuiteResult> results;
  for (const std::string& name : names) {
    if (name == "conjugacy")
      results.push_back(run_conjugacy_suite(opts));
    else if (name == "continuity")
      results.push_back(run_continuity_suite(opts));
    else if (name == "loss_shape")
      results.push_back(run_loss_shape_suite(opts));
    else if (name == "duality")
      results.push_back(run_duality_suite(opts, report));
    else if (name == "perfdiff")
      results.push_back(run_perf_diff_suite(opts));
    else if (name == "equivalence")
      results.push_back(run_equivalence_suite(opts, equivalence_table));
    else
      throw ConfigError("unknown suite: " + name);
  }
  return results;
}

}  // namespace flexrl
