#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace flexrl {

/// A real interval with independently open/closed endpoints. Infinite
/// endpoints are always open.
struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool lo_closed = false;
  bool hi_closed = false;

  static Interval all() { return {}; }
  static Interval open(double lo, double hi) { return {lo, hi, false, false}; }
  static Interval closed(double lo, double hi) { return {lo, hi, true, true}; }

  bool contains(double x) const {
    if (std::isnan(x)) return false;
    if (x < lo || (x == lo && !lo_closed)) return false;
    if (x > hi || (x == hi && !hi_closed)) return false;
    return true;
  }

  /// Strict interior membership (endpoints excluded regardless of closedness).
  bool interior_contains(double x) const {
    return !std::isnan(x) && x > lo && x < hi;
  }

  bool lo_finite() const { return std::isfinite(lo); }
  bool hi_finite() const { return std::isfinite(hi); }

  /// Clamp into the interior, backing off finite endpoints by `margin`.
  double clamp_interior(double x, double margin) const {
    double a = lo_finite() ? lo + margin : -std::numeric_limits<double>::infinity();
    double b = hi_finite() ? hi - margin : std::numeric_limits<double>::infinity();
    return std::min(std::max(x, a), b);
  }

  std::string str() const {
    auto fmt = [](double v) {
      if (v == std::numeric_limits<double>::infinity()) return std::string("inf");
      if (v == -std::numeric_limits<double>::infinity()) return std::string("-inf");
      return std::to_string(v);
    };
    return (lo_closed ? "[" : "(") + fmt(lo) + ", " + fmt(hi) + (hi_closed ? "]" : ")");
  }
};

}  // namespace flexrl
