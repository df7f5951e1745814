#include "flexrl/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace flexrl {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Series {
  std::string id;
  std::string color;
  std::vector<std::pair<double, double>> points;
};

// One panel: axes box plus polylines, scaled into a 300x220 viewport.
void emit_panel(std::ostream& out, double ox, const std::string& id,
                const std::string& caption, const std::vector<Series>& series,
                double x_min, double x_max) {
  double y_min = std::numeric_limits<double>::infinity(), y_max = -y_min;
  for (const Series& s : series)
    for (auto [x, y] : s.points) {
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  if (!(y_max > y_min)) {
    y_min -= 1.0;
    y_max += 1.0;
  }
  const double W = 280.0, H = 180.0, PX = 10.0, PY = 20.0;
  auto sx = [&](double x) { return ox + PX + (x - x_min) / (x_max - x_min) * W; };
  auto sy = [&](double y) { return PY + H - (y - y_min) / (y_max - y_min) * H; };

  out << "<g id=\"" << id << "\" data-x-min=\"" << fmt(x_min) << "\" data-x-max=\""
      << fmt(x_max) << "\" data-y-min=\"" << fmt(y_min) << "\" data-y-max=\""
      << fmt(y_max) << "\">\n";
  out << "<rect x=\"" << fmt(ox + PX) << "\" y=\"" << fmt(PY) << "\" width=\"" << fmt(W)
      << "\" height=\"" << fmt(H) << "\" fill=\"none\" stroke=\"#999\"/>\n";
  out << "<text x=\"" << fmt(ox + PX + 4) << "\" y=\"" << fmt(PY - 6)
      << "\" font-size=\"12\">" << caption << "</text>\n";
  for (const Series& s : series) {
    out << "<polyline id=\"" << s.id << "\" fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"1.5\" points=\"";
    for (auto [x, y] : s.points) out << fmt(sx(x)) << ',' << fmt(sy(y)) << ' ';
    out << "\"/>\n";
  }
  out << "</g>\n";
}

}  // namespace

void plot_divergence_functions(const FlexF& flex, const std::string& title,
                               const std::string& path) {
  const int N = 257;
  Interval zdom = flex.zeta_domain();
  Interval edom = flex.e_domain();

  double z_lo = zdom.lo_finite() ? zdom.lo + 1e-6 : std::min(-2.0, flex.beta - 3.0);
  double z_hi = std::max(3.0, flex.beta + 2.0);
  double e_lo = edom.lo_finite() ? edom.lo + 1e-9 : -2.0;
  double e_hi = edom.hi_finite() ? edom.hi : 2.0;  // truncate at the domain edge
  double e_eval_hi = edom.hi_finite() ? edom.hi - 1e-9 : e_hi;

  Series gstar{"gstar", "#1f77b4", {}};
  for (int i = 0; i < N; ++i) {
    double z = z_lo + (z_hi - z_lo) * i / (N - 1);
    gstar.points.push_back({z, flex.gstar(z)});
  }
  Series inv{"gstar_prime_inv", "#d62728", {}};
  Series conj{"g", "#2ca02c", {}};
  Series loss{"loss", "#9467bd", {}};
  LossProfile profile{flex, LpMode::NegTdError};
  for (int i = 0; i < N; ++i) {
    double e = e_lo + (e_eval_hi - e_lo) * i / (N - 1);
    inv.points.push_back({e, flex.gstar_prime_inv(std::min(e, e_eval_hi))});
    conj.points.push_back({e, flex.g(e)});
    loss.points.push_back({e, bellman_loss(profile, e)});
  }

  std::ofstream out(path);
  if (!out) throw IoError("plot_divergence_functions: cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1240\" height=\"240\" "
         "viewBox=\"0 0 1240 240\" data-flex=\""
      << flex.describe() << "\" data-e-max=\""
      << (edom.hi_finite() ? fmt(edom.hi) : std::string("inf")) << "\">\n";
  out << "<title>" << title << "</title>\n";
  emit_panel(out, 0.0, "panel_gstar", "g*(zeta)", {gstar}, z_lo, z_hi);
  emit_panel(out, 310.0, "panel_inv", "g*'^-1(e)", {inv}, e_lo, e_hi);
  emit_panel(out, 620.0, "panel_g", "g(e)", {conj}, e_lo, e_hi);
  emit_panel(out, 930.0, "panel_loss", "-e + g(e)", {loss}, e_lo, e_hi);
  out << "</svg>\n";
}

void plot_adaptive_trace(const std::vector<MetricsRow>& rows, const std::string& path) {
  if (rows.empty()) throw IoError("plot_adaptive_trace: empty metrics");
  Series ap{"alpha_plus", "#1f77b4", {}};
  Series am{"alpha_minus", "#d62728", {}};
  Series beta{"beta", "#2ca02c", {}};
  for (const MetricsRow& r : rows) {
    ap.points.push_back({static_cast<double>(r.step), r.alpha_plus});
    am.points.push_back({static_cast<double>(r.step), r.alpha_minus});
    beta.points.push_back({static_cast<double>(r.step), r.beta});
  }
  double x_min = ap.points.front().first, x_max = std::max(ap.points.back().first, x_min + 1.0);

  std::ofstream out(path);
  if (!out) throw IoError("plot_adaptive_trace: cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"620\" height=\"240\" "
         "viewBox=\"0 0 620 240\">\n";
  out << "<title>adaptive parameters</title>\n";
  emit_panel(out, 0.0, "panel_alphas", "alpha_pm over steps", {ap, am}, x_min, x_max);
  emit_panel(out, 310.0, "panel_beta", "beta over steps", {beta}, x_min, x_max);
  out << "</svg>\n";
}

}  // namespace flexrl
