#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "jsde/errors.hpp"

namespace jsde::quad {

struct Tolerance {
  double absolute = 1e-10;
  double relative = 1e-8;
  std::size_t max_panels = 4000;
};

namespace detail {

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

/// 7-point Gauss / 15-point Kronrod pair on [a, b].
template <class F>
Panel gk15(F& f, double a, double b) {
  using rule = boost::math::quadrature::gauss_kronrod<double, 15>;
  using gauss = boost::math::quadrature::gauss<double, 7>;
  const auto& x = rule::abscissa();
  const auto& wk = rule::weights();
  const auto& wg = gauss::weights();
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double f0 = f(c);
  double k = f0 * wk[0];
  double g = f0 * wg[0];
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double fp = f(c + h * x[i]);
    const double fm = f(c - h * x[i]);
    k += (fp + fm) * wk[i];
    // Gauss nodes sit at the odd Kronrod positions
    if (i % 2 == 0) g += (fp + fm) * wg[i / 2];
  }
  return {a, b, k * h, std::abs((k - g) * h)};
}

}  // namespace detail

/// Globally adaptive 15-point Gauss-Kronrod on [a, b]; either end may be
/// infinite (mapped by t / (1 - t)). Throws QuadratureError when the error
/// estimate misses max(absolute, relative * |result|).
template <class F>
double integrate(F&& f, double a, double b, const Tolerance& tol = {}) {
  if (a == b) return 0.0;
  if (a > b) return -integrate(f, b, a, tol);
  const bool lo_inf = std::isinf(a), hi_inf = std::isinf(b);
  auto g = [&](double t) -> double {
    if (lo_inf && hi_inf) {
      const double u = t / (1.0 - t * t);
      const double du = (1.0 + t * t) / ((1.0 - t * t) * (1.0 - t * t));
      return f(u) * du;
    }
    if (hi_inf) {
      const double u = a + t / (1.0 - t);
      return f(u) / ((1.0 - t) * (1.0 - t));
    }
    if (lo_inf) {
      const double u = b - (1.0 - t) / t;
      return f(u) / (t * t);
    }
    return f(t);
  };
  double ta = a, tb = b;
  if (lo_inf && hi_inf) {
    ta = -1.0;
    tb = 1.0;
  } else if (hi_inf) {
    ta = 0.0;
    tb = 1.0;
  } else if (lo_inf) {
    ta = 0.0;
    tb = 1.0;
  }
  std::vector<detail::Panel> heap;
  heap.push_back(detail::gk15(g, ta, tb));
  double value = heap.front().value, error = heap.front().error;
  auto done = [&] { return error <= std::max(tol.absolute, tol.relative * std::abs(value)); };
  while (!done() && heap.size() < tol.max_panels) {
    std::pop_heap(heap.begin(), heap.end());
    const detail::Panel worst = heap.back();
    heap.pop_back();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      heap.push_back(worst);
      std::push_heap(heap.begin(), heap.end());
      break;
    }
    const detail::Panel l = detail::gk15(g, worst.a, mid), r = detail::gk15(g, mid, worst.b);
    value += l.value + r.value - worst.value;
    error += l.error + r.error - worst.error;
    heap.push_back(l);
    std::push_heap(heap.begin(), heap.end());
    heap.push_back(r);
    std::push_heap(heap.begin(), heap.end());
  }
  // re-add from the panels to shed the drift of the running sums
  value = 0.0;
  error = 0.0;
  for (const auto& p : heap) {
    value += p.value;
    error += p.error;
  }
  if (!std::isfinite(value)) {
    char buf[120];
    std::snprintf(buf, sizeof buf, "quadrature produced a non-finite value on [%g, %g]", a, b);
    throw QuadratureError(buf);
  }
  if (!done()) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "quadrature did not converge on [%g, %g], error estimate %.3g (value %.6g)", a, b,
                  error, value);
    throw QuadratureError(buf);
  }
  return value;
}

/// Integral over (lo, hi] of f(z) dz with 0 <= lo < hi <= inf, evaluated in s = log z.
/// Long or infinite log ranges are cut at fixed pivots so that each piece
/// sees an integrand of moderate dynamic range.
template <class F>
double integrate_log(F&& f, double lo, double hi, const Tolerance& tol = {}) {
  if (!(hi > lo)) return 0.0;
  const double inf = std::numeric_limits<double>::infinity();
  const double s_lo = lo > 0.0 ? std::log(lo) : -inf;
  const double s_hi = std::isinf(hi) ? inf : std::log(hi);
  auto g = [&](double s) {
    const double z = std::exp(s);
    if (z == 0.0 || std::isinf(z)) return 0.0;
    const double v = f(z) * z;
    // overflow of a density factor far out in either tail, where the
    // product itself is negligible
    if (!std::isfinite(v) && (z < 1e-90 || z > 1e90)) return 0.0;
    return v;
  };
  static constexpr double pivots[] = {-200.0, -100.0, -50.0, -25.0, -12.0, -6.0, -3.0, 0.0,
                                      3.0,    6.0,    12.0,  25.0,  50.0,  100.0, 200.0};
  double sum = 0.0;
  double a = s_lo;
  for (double p : pivots) {
    if (p > a && p < s_hi) {
      sum += integrate(g, a, p, tol);
      a = p;
    }
  }
  return sum + integrate(g, a, s_hi, tol);
}

/// Same as integrate_log but split at the given interior breakpoints.
template <class F>
double integrate_log_split(F&& f, double lo, double hi, std::span<const double> breaks,
                           const Tolerance& tol = {}) {
  std::vector<double> cuts;
  cuts.push_back(lo);
  for (double c : breaks) {
    if (c > lo && c < hi) cuts.push_back(c);
  }
  std::sort(cuts.begin() + 1, cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  cuts.push_back(hi);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    sum += integrate_log(f, cuts[i], cuts[i + 1], tol);
  }
  return sum;
}

/// Fixed 10-point Gauss-Legendre rule on a finite interval.
template <class F>
double gauss10(F&& f, double a, double b) {
  return boost::math::quadrature::gauss<double, 10>::integrate(f, a, b);
}

}  // namespace jsde::quad
