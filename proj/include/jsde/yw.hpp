#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "jsde/errors.hpp"
#include "jsde/levy_measure.hpp"
#include "jsde/modulus.hpp"
#include "jsde/quadrature.hpp"
#include "jsde/rng.hpp"
#include "jsde/sde.hpp"

namespace jsde {

/// Levels 1 = a_0 > a_1 > ... > a_K with integral of rho^-2 over (a_k, a_{k-1}) equal to k,
/// returned as log a_k (a_k underflows quickly for rho = sqrt).
inline std::vector<double> compute_log_levels(const Modulus& rho, int K) {
  if (K < 0) throw DomainError("compute_levels: K must be non-negative");
  std::vector<double> s(static_cast<std::size_t>(K) + 1, 0.0);
  const auto lambda = [&](double x) { return rho.inverse_square_from_one(x); };
  for (int k = 1; k <= K; ++k) {
    const double target = 0.5 * static_cast<double>(k) * static_cast<double>(k + 1);
    double hi = s[static_cast<std::size_t>(k - 1)];
    double step = 1.0;
    double lo = hi - step;
    while (lambda(lo) < target) {
      hi = lo;
      step *= 2.0;
      lo = hi - step;
      if (step > 1e12) throw LevelExhaustionError("integral of rho^-2 is bounded; level " + std::to_string(k) + " does not exist", k);
    }
    for (int it = 0; it < 400; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      if (lambda(mid) < target) hi = mid; else lo = mid;
    }
    s[static_cast<std::size_t>(k)] = 0.5 * (lo + hi);
  }
  return s;
}

inline std::vector<double> compute_levels(const Modulus& rho, int K) {
  auto s = compute_log_levels(rho, K);
  for (double& v : s) v = std::exp(v);
  s.front() = 1.0;
  return s;
}

namespace bump {

/// Quintic smoothstep S(t) and its primitive P(t) on [0, 1].
inline double S(double t) { return t * t * t * (t * (6.0 * t - 15.0) + 10.0); }
inline double P(double t) { return t * t * t * t * (t * (t - 3.0) + 2.5); }

/// Plateau profile on [0, 1]: rises on [0, 1/4], equals 1 on [1/4, 3/4], falls on [3/4, 1].
inline double m(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  if (u < 0.25) return S(4.0 * u);
  if (u > 0.75) return S(4.0 * (1.0 - u));
  return 1.0;
}

/// Integral of m over [0, u]; total 3/4.
inline double M(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 0.75;
  if (u <= 0.25) return P(4.0 * u) / 4.0;
  if (u <= 0.75) return 0.125 + (u - 0.25);
  return 0.75 - P(4.0 * (1.0 - u)) / 4.0;
}

inline constexpr double kMass = 0.75;

}  // namespace bump

/// The test-function triple (psi_k, phi_k', phi_k'') and phi_k itself for one k.
///
/// With Lambda(z) the integral of rho^-2 over (z, 1] and
/// w(z) = (Lambda(a_k) - Lambda(z)) / k, which runs from 0 at a_k to 1 at a_{k-1},
///   psi_k(z)  = c_k m(w) rho(z)^-2,  c_k = 4 / (3k)
///   phi_k'(z) = (4/3) M(w)
/// phi_k is integrated numerically on fixed panels in log z.
class YwLevel {
 public:
  static constexpr int kPanels = 96;  // split evenly over the three bump pieces

  YwLevel(const Modulus& rho, int k, double log_lo, double log_hi)
      : rho_(rho), k_(k), s_lo_(log_lo), s_hi_(log_hi) {
    lambda_lo_ = rho_.inverse_square_from_one(s_lo_);
    lambda_hi_ = rho_.inverse_square_from_one(s_hi_);
    c_k_ = 1.0 / (bump::kMass * k_);
    // panels split where the bump changes piece, so each panel sees a smooth integrand
    const double q1 = log_at_w(0.25), q3 = log_at_w(0.75);
    const double piece[4] = {s_lo_, q1, q3, s_hi_};
    edges_.clear();
    for (int j = 0; j < 3; ++j) {
      for (int i = 0; i < kPanels / 3; ++i) edges_.push_back(piece[j] + (piece[j + 1] - piece[j]) * i / (kPanels / 3));
    }
    edges_.push_back(s_hi_);
    // phi on the support: cumulative integral of phi' in s, scaled by e^{-s_hi}
    cum_.assign(edges_.size(), 0.0);
    gap_cum_.assign(edges_.size(), 0.0);
    for (std::size_t i = 0; i + 1 < edges_.size(); ++i) {
      const double a = edges_[i], b = edges_[i + 1];
      cum_[i + 1] = cum_[i] + quad::gauss10([&](double s) { return dphi_log(s) * std::exp(s - s_hi_); }, a, b);
      gap_cum_[i + 1] = gap_cum_[i] + quad::gauss10([&](double s) { return (1.0 - dphi_log(s)) * std::exp(s - s_hi_); }, a, b);
    }
    // gap = integral of (1 - phi') over (0, a_{k-1}) = a_k + integral over the support
    gap_scaled_ = std::exp(s_lo_ - s_hi_) + gap_cum_.back();
  }

  int k() const noexcept { return k_; }
  double log_lower() const noexcept { return s_lo_; }
  double log_upper() const noexcept { return s_hi_; }
  double lower() const { return std::exp(s_lo_); }
  double upper() const { return std::exp(s_hi_); }
  double normalization() const noexcept { return c_k_; }

  /// |z| - phi(z) for |z| >= a_{k-1}.
  double gap() const { return gap_scaled_ * std::exp(s_hi_); }

  /// w coordinate for log|z| inside the support.
  double w_of_log(double s) const {
    return (lambda_lo_ - rho_.inverse_square_from_one(s)) / static_cast<double>(k_);
  }

  double psi(double x) const {
    const double ax = std::abs(x);
    if (!(ax > 0.0)) return 0.0;
    const double s = std::log(ax);
    if (!(s > s_lo_ && s < s_hi_)) return 0.0;
    const double r = rho_(ax);
    return c_k_ * bump::m(w_of_log(s)) / (r * r);
  }

  /// psi expressed for log-scale inputs; avoids forming tiny z.
  double psi_log(double s) const {
    if (!(s > s_lo_ && s < s_hi_)) return 0.0;
    const double r = rho_(std::exp(s));
    return c_k_ * bump::m(w_of_log(s)) / (r * r);
  }

  double dphi_log(double s) const {
    if (s <= s_lo_) return 0.0;
    if (s >= s_hi_) return 1.0;
    return std::clamp(bump::M(w_of_log(s)) / bump::kMass, 0.0, 1.0);
  }

  double dphi(double z) const {
    if (z == 0.0) return 0.0;
    const double v = dphi_log(std::log(std::abs(z)));
    return z > 0.0 ? v : -v;
  }

  double d2phi(double z) const { return psi(z); }

  double phi(double z) const {
    const double az = std::abs(z);
    if (!(az > 0.0)) return 0.0;
    const double s = std::log(az);
    if (s <= s_lo_) return 0.0;
    if (s >= s_hi_) return az - gap();
    const auto it = std::upper_bound(edges_.begin(), edges_.end(), s);
    const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - edges_.begin()) - 1, edges_.size() - 2);
    const double a = edges_[i];
    const double part = quad::gauss10([&](double t) { return dphi_log(t) * std::exp(t - s_hi_); }, a, s);
    return (cum_[i] + part) * std::exp(s_hi_);
  }

  /// D_z phi(w) = phi(w + z) - phi(w) - phi'(w) z.
  double D(double w, double z) const {
    if (z == 0.0) return 0.0;
    if (std::abs(z) <= 0.25 * std::abs(w)) return D_taylor(w, z);
    return phi(w + z) - phi(w) - dphi(w) * z;
  }

  /// z^2 times the integral of (1 - t) psi(|w + t z|) over [0, 1], piecewise Gauss.
  double D_taylor(double w, double z) const {
    if (z == 0.0) return 0.0;
    // breakpoints in t where |w + t z| crosses the support edges, the plateau edges, or 0
    std::vector<double> cuts{0.0, 1.0};
    const auto add = [&](double x) {
      for (double sgn : {1.0, -1.0}) {
        const double t = (sgn * x - w) / z;
        if (t > 0.0 && t < 1.0) cuts.push_back(t);
      }
    };
    add(0.0);
    add(lower());
    add(upper());
    for (double wq : {0.25, 0.75}) add(std::exp(log_at_w(wq)));
    std::sort(cuts.begin(), cuts.end());
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double a = cuts[i], b = cuts[i + 1];
      if (b <= a) continue;
      // subdivide geometrically in |w + t z| so psi ~ rho^-2 is resolved
      const double xa = std::abs(w + a * z), xb = std::abs(w + b * z);
      const int pieces = std::clamp(static_cast<int>(std::ceil(std::abs(std::log((xb + 1e-300) / (xa + 1e-300))) / 0.05)), 1, 400);
      for (int j = 0; j < pieces; ++j) {
        const double ta = a + (b - a) * j / pieces, tb = a + (b - a) * (j + 1) / pieces;
        sum += quad::gauss10([&](double t) { return (1.0 - t) * psi(w + t * z); }, ta, tb);
      }
    }
    return z * z * sum;
  }

  /// log z where the w coordinate equals wq (bisection).
  double log_at_w(double wq) const {
    double lo = s_lo_, hi = s_hi_;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      if (w_of_log(mid) < wq) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
  }

  /// Integral of psi over the support, evaluated in log z.
  double psi_integral() const {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < edges_.size(); ++i) {
      total += quad::gauss10([&](double s) { return psi_log_scaled(s); }, edges_[i], edges_[i + 1]);
    }
    return total;
  }

  /// psi(e^s) e^s, computed without forming e^s when rho is a power.
  double psi_log_scaled(double s) const {
    if (!(s > s_lo_ && s < s_hi_)) return 0.0;
    const double w = w_of_log(s);
    const double mw = bump::m(w);
    if (mw == 0.0) return 0.0;
    if (rho_.family == Modulus::Family::Power) {
      return c_k_ * mw * std::exp((1.0 - 2.0 * rho_.exponent) * s) / (rho_.scale * rho_.scale);
    }
    const double z = std::exp(s);
    const double r = rho_(z);
    return c_k_ * mw * z / (r * r);
  }

  /// sup over the support of k * psi * rho^2 (equals k c_k = 4/3).
  double cap_ratio(double x) const {
    const double r = rho_(std::abs(x));
    return static_cast<double>(k_) * psi(x) * r * r;
  }

 private:
  Modulus rho_;
  int k_;
  double s_lo_, s_hi_;
  double lambda_lo_ = 0.0, lambda_hi_ = 0.0;
  double c_k_ = 1.0;
  std::vector<double> edges_;
  std::vector<double> cum_;
  std::vector<double> gap_cum_;
  double gap_scaled_ = 0.0;
};

/// Levels and test functions for k = 1..K.
class YwSequence {
 public:
  YwSequence(Modulus rho, int K) : rho_(std::move(rho)) {
    const auto osg = osgood_diverges(rho_, OsgoodKind::RhoSquared);
    if (osg.verdict == Divergence::Converges) {
      // levels still exist for small k; compute_log_levels names the first failure
    }
    log_levels_ = compute_log_levels(rho_, K);
    levels_.reserve(static_cast<std::size_t>(K));
    for (int k = 1; k <= K; ++k) {
      levels_.emplace_back(rho_, k, log_levels_[static_cast<std::size_t>(k)], log_levels_[static_cast<std::size_t>(k - 1)]);
      const double cap = levels_.back().normalization() * 1.0;  // sup m = 1
      if (cap > 2.0 / k * (1.0 + 1e-15)) throw EstimationError("psi normalization exceeds the 2/k cap", cap);
    }
  }

  const Modulus& modulus() const noexcept { return rho_; }
  int size() const noexcept { return static_cast<int>(levels_.size()); }
  const std::vector<double>& log_levels() const noexcept { return log_levels_; }
  double level(int k) const { return std::exp(log_levels_.at(static_cast<std::size_t>(k))); }
  const YwLevel& operator[](int k) const { return levels_.at(static_cast<std::size_t>(k - 1)); }

 private:
  Modulus rho_;
  std::vector<double> log_levels_;
  std::vector<YwLevel> levels_;
};

inline YwLevel build_phi(const Modulus& rho, int k) {
  if (k < 1) throw DomainError("build_phi: k must be at least 1");
  const auto s = compute_log_levels(rho, k);
  return YwLevel(rho, k, s[static_cast<std::size_t>(k)], s[static_cast<std::size_t>(k - 1)]);
}

/// ((1 - 2p)/(2 - alpha), p/(alpha - 1)); empty exactly when p <= 1 - 1/alpha.
struct BetaWindow {
  double lo;
  double hi;
  bool empty;
};

inline BetaWindow beta_window(double p, double alpha) {
  if (!(alpha > 1.0 && alpha < 2.0)) throw DomainError("beta_window: alpha must lie in (1, 2)");
  BetaWindow w{(1.0 - 2.0 * p) / (2.0 - alpha), p / (alpha - 1.0), true};
  // p alpha > alpha - 1, with alpha - 1 exact and a single rounding in fma
  w.empty = !(std::fma(p, alpha, -(alpha - 1.0)) > 0.0);
  return w;
}

/// v_k = k^{1/(2(2 - alpha))}, so that v_k^{2-alpha} / k = k^{-1/2}.
inline double stable_vk(double alpha, double k) {
  if (!(alpha > 1.0 && alpha < 2.0)) throw DomainError("stable_vk: alpha must lie in (1, 2)");
  return std::pow(k, 1.0 / (2.0 * (2.0 - alpha)));
}

/// Critical Hoelder exponent 1 - 1/alpha.
inline double critical_exponent(double alpha) { return 1.0 - 1.0 / alpha; }

/// Integral over the jump sizes of D_{l(z)} phi_k(w) with l(z) = delta * z,
/// split at the support scale and evaluated in log z.
inline double integral_D_linear(const YwLevel& lev, const LevyMeasure& nu0, double w, double delta) {
  if (delta == 0.0) return 0.0;
  const double inf = std::numeric_limits<double>::infinity();
  const double ad = std::abs(delta);
  std::vector<double> breaks;
  for (double x : {lev.lower(), lev.upper(), std::abs(w)}) {
    if (x > 0.0) breaks.push_back(x / ad);
  }
  if (std::abs(w) > 0.0) {
    breaks.push_back(0.25 * std::abs(w) / ad);
    breaks.push_back((std::abs(w) + lev.upper()) / ad);
  }
  quad::Tolerance tol;
  tol.absolute = 1e-9;
  tol.relative = 1e-7;
  return nu0.integrate([&](double z) { return lev.D(w, delta * z); }, 0.0, inf, breaks, tol);
}

struct JumpIntegralBound {
  double lhs;
  double rhs;
};

/// Integral of D_{l0} phi_k(x - y) against nu0 for l0 = (h0(x) - h0(y)) z,
/// and the two-term bound with jump envelope f(z) = envelope * z and cutoff h.
inline JumpIntegralBound jump_integral_bound(const YwLevel& lev, const Modulus& rho, double p, double x, double y, double h,
                                   const SdeSystem& sys, const LevyMeasure& nu0) {
  if (!(h > 0.0)) throw DomainError("jump_integral_bound: h must be positive");
  const double w = x - y;
  const double delta = sys.h0_at(x) - sys.h0_at(y);
  JumpIntegralBound out{0.0, 0.0};
  out.lhs = integral_D_linear(lev, nu0, w, delta);
  const double d = std::abs(w);
  if (d > 0.0 && d <= lev.upper()) {
    const double c = sys.reg.envelope;
    const double rd = rho(d);
    // f^2 1{f <= h} and f 1{f > h} for f = c z
    const double small = c * c * nu0.truncated_second_moment(h / c);
    const double large = c * nu0.tail_first_moment(h / c);
    out.rhs = std::pow(rd, 4.0 * p - 2.0) * small / lev.k() + std::pow(rd, 2.0 * p) * large;
  }
  return out;
}

/// Witness h = rho(|x - y|)^{2/alpha} v_k for the stable case.
inline double stable_cutoff(const Modulus& rho, double x, double y, double alpha, int k) {
  return std::pow(rho(std::abs(x - y)), 2.0 / alpha) * stable_vk(alpha, k);
}

/// k^{-1}(2-alpha)^{-1} v_k^{2-alpha} + (alpha-1)^{-1} v_k^{1-alpha}.
inline double stable_display_bound(double alpha, int k) {
  const double v = stable_vk(alpha, k);
  return std::pow(v, 2.0 - alpha) / ((2.0 - alpha) * k) + std::pow(v, 1.0 - alpha) / (alpha - 1.0);
}

struct PropertyWitness {
  double x = 0.0;
  double y = 0.0;
  int k = 0;
  double value = 0.0;
};

struct TestFunctionReport {
  bool monotone_convergence = true;   // 0 <= phi_k <= phi_{k+1} <= |z|
  bool derivative_bounds = true;      // |phi_k'| <= 1, phi_k'' >= 0
  bool diffusion_cap = true;          // phi_k''(x-y) (sigma(x)-sigma(y))^2 <= 2/k
  bool jump_integral_decay = true;    // jump integral decreasing in k
  std::vector<double> diffusion_sup;  // per k: sup phi''(x-y)(sigma(x)-sigma(y))^2
  std::vector<double> jump_sup;       // per k: sup of the jump integral over samples
  std::optional<PropertyWitness> witness;
  bool all() const { return monotone_convergence && derivative_bounds && diffusion_cap && jump_integral_decay; }
};

/// Samples (x, y) in [-m, m]^2 and checks the four test-function properties.
inline TestFunctionReport verify_test_functions(const YwSequence& seq, const SdeSystem& sys, const LevyMeasure* nu0, double m,
                                  int samples, std::uint64_t seed = 7, bool check_jumps = true) {
  TestFunctionReport rep;
  const RandomStream rs(seed, 0);
  Lane lane(rs, Purpose::Generic);
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < samples; ++i) {
    const double x = m * (2.0 * lane.uniform() - 1.0);
    // bias half the samples toward close pairs so small |x - y| is exercised
    double y;
    if (i % 2 == 0) {
      y = m * (2.0 * lane.uniform() - 1.0);
    } else {
      const double scale = std::exp(-12.0 * lane.uniform());
      y = std::clamp(x + scale * (2.0 * lane.uniform() - 1.0), -m, m);
    }
    pts.emplace_back(x, y);
  }
  const int K = seq.size();
  for (int k = 1; k <= K; ++k) {
    const YwLevel& lev = seq[k];
    double dsup = 0.0;
    double jsup = 0.0;
    for (const auto& [x, y] : pts) {
      const double z = x - y;
      const double ph = lev.phi(z);
      const double dp = lev.dphi(z);
      if (ph < -1e-15 || ph > std::abs(z) * (1.0 + 1e-12) + 1e-300) {
        rep.monotone_convergence = false;
        rep.witness = PropertyWitness{x, y, k, ph};
      }
      if (k < K && seq[k + 1].phi(z) < ph - 1e-12 * std::abs(z)) {
        rep.monotone_convergence = false;
        rep.witness = PropertyWitness{x, y, k, ph};
      }
      if ((z > 0.0 && (dp < 0.0 || dp > 1.0)) || (z < 0.0 && (dp > 0.0 || dp < -1.0)) || lev.d2phi(z) < 0.0) {
        rep.derivative_bounds = false;
        rep.witness = PropertyWitness{x, y, k, dp};
      }
      const double ds = sys.diffusion(x) - sys.diffusion(y);
      const double v = lev.d2phi(z) * ds * ds;
      if (v > dsup) dsup = v;
      if (v > 2.0 / k * (1.0 + 1e-9)) {
        rep.diffusion_cap = false;
        rep.witness = PropertyWitness{x, y, k, v};
      }
    }
    if (check_jumps && nu0 && sys.has_jump0() && sys.multiplicative0()) {
      for (std::size_t i = 0; i < pts.size(); i += std::max<std::size_t>(1, pts.size() / 20)) {
        const auto [x, y] = pts[i];
        const double J = integral_D_linear(lev, *nu0, x - y, sys.h0_at(x) - sys.h0_at(y));
        jsup = std::max(jsup, J);
      }
    }
    rep.diffusion_sup.push_back(dsup);
    rep.jump_sup.push_back(jsup);
  }
  if (check_jumps && nu0 && sys.has_jump0() && K >= 2) {
    // decreasing trend: last sup below the first, and no increase beyond tolerance
    for (std::size_t i = 1; i < rep.jump_sup.size(); ++i) {
      if (rep.jump_sup[i] > rep.jump_sup[i - 1] * (1.0 + 1e-6) + 1e-12) rep.jump_integral_decay = false;
    }
    if (!(rep.jump_sup.back() < rep.jump_sup.front() || rep.jump_sup.front() == 0.0)) rep.jump_integral_decay = false;
  }
  return rep;
}

}  // namespace jsde
