#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "jsde/errors.hpp"
#include "jsde/quadrature.hpp"

namespace jsde {

/// Which integrability contract a measure must satisfy.
///  - CompensatedDriver: integral of (z ^ z^2) is finite.
///  - Subordinator:      integral of (1 ^ z) is finite.
enum class MeasureRole { CompensatedDriver, Subordinator };

inline const char* to_string(MeasureRole r) {
  return r == MeasureRole::CompensatedDriver ? "driver" : "subordinator";
}

/// Density scale * z^(-1-alpha) on (0, inf), 1 < alpha < 2.
struct StablePositive {
  double alpha = 1.5;
  double scale = 1.0;
};

/// Density scale * z^(-1-alpha) * exp(-tempering * z).
struct TemperedStable {
  double alpha = 1.5;
  double scale = 1.0;
  double tempering = 1.0;
};

struct JumpLaw {
  enum class Kind { Uniform, Exponential };
  Kind kind = Kind::Uniform;
  double a = 0.0;  // uniform: lower end; exponential: mean
  double b = 1.0;  // uniform: upper end

  static JumpLaw uniform(double lo, double hi) { return {Kind::Uniform, lo, hi}; }
  static JumpLaw exponential(double mean) { return {Kind::Exponential, mean, 0.0}; }

  double pdf(double z) const {
    if (kind == Kind::Uniform) return (z > a && z <= b) ? 1.0 / (b - a) : 0.0;
    return z > 0.0 ? std::exp(-z / a) / a : 0.0;
  }
  /// P(Z > x)
  double survival(double x) const {
    if (kind == Kind::Uniform) {
      if (x <= a) return 1.0;
      if (x >= b) return 0.0;
      return (b - x) / (b - a);
    }
    return x <= 0.0 ? 1.0 : std::exp(-x / a);
  }
  /// Smallest z with P(Z > z) <= q, q in (0, 1].
  double inverse_survival(double q) const {
    if (kind == Kind::Uniform) return b - q * (b - a);
    return -a * std::log(q);
  }
};

/// Compound-Poisson measure rate * law.
struct FiniteActivity {
  double rate = 1.0;
  JumpLaw law;
};

struct PointMass {
  double location = 1.0;
  double mass = 1.0;
};

/// Behaviour of a tabulated density outside its knot range.
struct TailDescriptor {
  enum class Kind { None, Power, Exponential };
  Kind kind = Kind::None;
  /// Power: density exponent e (density ~ z^e); Exponential: decay rate.
  double value = 0.0;

  static TailDescriptor none() { return {}; }
  static TailDescriptor power(double e) { return {Kind::Power, e}; }
  static TailDescriptor exponential(double r) { return {Kind::Exponential, r}; }
};

/// Density given at knots, interpolated log-linearly (piecewise power law)
/// between positive neighbours and linearly when a neighbour is zero.
struct Tabulated {
  std::vector<double> knots;
  std::vector<double> density;
  TailDescriptor lower;
  TailDescriptor upper;
};

using MeasureShape = std::variant<StablePositive, TemperedStable, FiniteActivity, PointMass, Tabulated>;

/// A sigma-finite jump-intensity measure on (0, inf). Immutable.
class LevyMeasure {
 public:
  struct Atom {
    double location;
    double mass;
  };

  LevyMeasure(MeasureShape shape, MeasureRole role) : shape_(std::move(shape)), role_(role) {
    validate();
  }

  static LevyMeasure stable(double alpha, double scale = 1.0,
                            MeasureRole role = MeasureRole::CompensatedDriver) {
    return {StablePositive{alpha, scale}, role};
  }
  static LevyMeasure point_mass(double location, double mass,
                                MeasureRole role = MeasureRole::CompensatedDriver) {
    return {PointMass{location, mass}, role};
  }
  static LevyMeasure finite_activity(double rate, JumpLaw law,
                                     MeasureRole role = MeasureRole::CompensatedDriver) {
    return {FiniteActivity{rate, law}, role};
  }
  static LevyMeasure tempered(double alpha, double scale, double tempering,
                              MeasureRole role = MeasureRole::CompensatedDriver) {
    return {TemperedStable{alpha, scale, tempering}, role};
  }

  const MeasureShape& shape() const noexcept { return shape_; }
  MeasureRole role() const noexcept { return role_; }

  template <class T>
  const T* as() const noexcept {
    return std::get_if<T>(&shape_);
  }

  std::string variant_name() const {
    return std::visit(
        [](const auto& s) -> std::string {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, StablePositive>) return "stable";
          if constexpr (std::is_same_v<T, TemperedStable>) return "tempered";
          if constexpr (std::is_same_v<T, FiniteActivity>) return "finite";
          if constexpr (std::is_same_v<T, PointMass>) return "point";
          if constexpr (std::is_same_v<T, Tabulated>) return "tabulated";
        },
        shape_);
  }

  /// Density of the absolutely continuous part.
  double density(double z) const {
    if (!(z > 0.0)) return 0.0;
    return std::visit(
        [z](const auto& s) -> double {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, StablePositive>) {
            return s.scale * std::pow(z, -1.0 - s.alpha);
          } else if constexpr (std::is_same_v<T, TemperedStable>) {
            return s.scale * std::pow(z, -1.0 - s.alpha) * std::exp(-s.tempering * z);
          } else if constexpr (std::is_same_v<T, FiniteActivity>) {
            return s.rate * s.law.pdf(z);
          } else if constexpr (std::is_same_v<T, PointMass>) {
            return 0.0;
          } else {
            return tabulated_density(s, z);
          }
        },
        shape_);
  }

  std::vector<Atom> atoms() const {
    if (const auto* p = as<PointMass>()) return {{p->location, p->mass}};
    return {};
  }

  /// Points where the density is not smooth.
  std::vector<double> breakpoints() const {
    if (const auto* f = as<FiniteActivity>()) {
      if (f->law.kind == JumpLaw::Kind::Uniform) return {f->law.a, f->law.b};
      return {};
    }
    if (const auto* t = as<Tabulated>()) return t->knots;
    return {};
  }

  /// Integral of f over (lo, hi] against the measure.
  template <class F>
  double integrate(F&& f, double lo, double hi, std::span<const double> extra_breaks = {},
                   const quad::Tolerance& tol = {}) const {
    if (!(hi > lo)) return 0.0;
    double sum = 0.0;
    for (const Atom& a : atoms()) {
      if (a.location > lo && a.location <= hi) sum += a.mass * f(a.location);
    }
    if (as<PointMass>()) return sum;
    std::vector<double> breaks = breakpoints();
    breaks.insert(breaks.end(), extra_breaks.begin(), extra_breaks.end());
    auto g = [&](double z) {
      const double d = density(z);
      return d == 0.0 ? 0.0 : f(z) * d;
    };
    sum += quad::integrate_log_split(g, lo, hi, breaks, tol);
    return sum;
  }

  /// nu((x, inf)).
  double tail_mass(double x) const {
    if (x < 0.0) throw DomainError("tail_mass: x must be non-negative");
    if (const auto* s = as<StablePositive>()) {
      if (x == 0.0) return std::numeric_limits<double>::infinity();
      return s->scale * std::pow(x, -s->alpha) / s->alpha;
    }
    if (const auto* p = as<PointMass>()) return p->location > x ? p->mass : 0.0;
    if (const auto* f = as<FiniteActivity>()) return f->rate * f->law.survival(x);
    if (x == 0.0 && !finite_total_mass()) return std::numeric_limits<double>::infinity();
    return integrate([](double) { return 1.0; }, x, std::numeric_limits<double>::infinity());
  }

  bool finite_total_mass() const {
    if (as<StablePositive>() || as<TemperedStable>()) return false;
    if (const auto* t = as<Tabulated>()) {
      return t->lower.kind != TailDescriptor::Kind::Power || t->lower.value > -1.0;
    }
    return true;
  }

  /// Integral of z over (x, inf).
  double tail_first_moment(double x) const {
    if (!(x > 0.0)) throw DomainError("tail_first_moment: x must be positive");
    if (const auto* s = as<StablePositive>()) {
      return s->scale * std::pow(x, 1.0 - s->alpha) / (s->alpha - 1.0);
    }
    if (const auto* p = as<PointMass>()) return p->location > x ? p->location * p->mass : 0.0;
    if (!finite_first_moment_at_infinity()) {
      throw IntegrabilityError("tail_first_moment: integral of z against the measure diverges at infinity");
    }
    return integrate([](double z) { return z; }, x, std::numeric_limits<double>::infinity());
  }

  /// Integral of z^2 over (0, x].
  double truncated_second_moment(double x) const {
    if (!(x > 0.0)) throw DomainError("truncated_second_moment: x must be positive");
    if (const auto* s = as<StablePositive>()) {
      return s->scale * std::pow(x, 2.0 - s->alpha) / (2.0 - s->alpha);
    }
    if (const auto* p = as<PointMass>()) {
      return p->location <= x ? p->location * p->location * p->mass : 0.0;
    }
    return integrate([](double z) { return z * z; }, 0.0, x);
  }

  /// Integral of z over (0, x]; finite only when the small jumps are summable.
  double truncated_first_moment(double x) const {
    if (!(x > 0.0)) throw DomainError("truncated_first_moment: x must be positive");
    if (!finite_first_moment_at_zero()) {
      throw IntegrabilityError("truncated_first_moment: integral of z near 0 diverges");
    }
    if (const auto* p = as<PointMass>()) return p->location <= x ? p->location * p->mass : 0.0;
    return integrate([](double z) { return z; }, 0.0, x);
  }

  /// Integral of (z ^ z^2) for drivers, (1 ^ z) for subordinators.
  double contract_integral() const {
    const double inf = std::numeric_limits<double>::infinity();
    if (role_ == MeasureRole::CompensatedDriver) {
      return integrate([](double z) { return z * z; }, 0.0, 1.0) +
             integrate([](double z) { return z; }, 1.0, inf);
    }
    return integrate([](double z) { return z; }, 0.0, 1.0) +
           integrate([](double) { return 1.0; }, 1.0, inf);
  }

  bool finite_first_moment_at_zero() const {
    if (as<StablePositive>()) return false;
    if (const auto* t = as<TemperedStable>()) return t->alpha < 1.0;
    if (const auto* t = as<Tabulated>()) {
      return t->lower.kind != TailDescriptor::Kind::Power || t->lower.value > -2.0;
    }
    return true;
  }

  bool finite_first_moment_at_infinity() const {
    if (const auto* t = as<Tabulated>()) {
      return t->upper.kind != TailDescriptor::Kind::Power || t->upper.value < -2.0;
    }
    return true;
  }

 private:
  static double tabulated_density(const Tabulated& t, double z) {
    const auto& k = t.knots;
    const auto& d = t.density;
    if (z < k.front()) {
      if (t.lower.kind == TailDescriptor::Kind::Power) return d.front() * std::pow(z / k.front(), t.lower.value);
      return 0.0;
    }
    if (z > k.back()) {
      switch (t.upper.kind) {
        case TailDescriptor::Kind::Power:
          return d.back() * std::pow(z / k.back(), t.upper.value);
        case TailDescriptor::Kind::Exponential:
          return d.back() * std::exp(-t.upper.value * (z - k.back()));
        case TailDescriptor::Kind::None:
          return 0.0;
      }
    }
    const auto it = std::upper_bound(k.begin(), k.end(), z);
    const std::size_t i = it == k.end() ? k.size() - 2 : static_cast<std::size_t>(it - k.begin()) - 1;
    const double z0 = k[i], z1 = k[i + 1];
    const double f0 = d[i], f1 = d[i + 1];
    if (f0 > 0.0 && f1 > 0.0) {
      const double slope = std::log(f1 / f0) / std::log(z1 / z0);
      return f0 * std::pow(z / z0, slope);
    }
    return f0 + (f1 - f0) * (z - z0) / (z1 - z0);
  }

  void validate() const {
    const bool driver = role_ == MeasureRole::CompensatedDriver;
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, StablePositive>) {
            if (!(s.alpha > 1.0 && s.alpha < 2.0)) throw DomainError("stable: alpha must lie in (1, 2)");
            if (!(s.scale > 0.0)) throw DomainError("stable: scale must be positive");
            if (!driver) {
              throw IntegrabilityError("stable measure with alpha in (1,2) violates the subordinator contract");
            }
          } else if constexpr (std::is_same_v<T, TemperedStable>) {
            if (!(s.alpha > 0.0 && s.alpha < 2.0)) throw DomainError("tempered: alpha must lie in (0, 2)");
            if (!(s.scale > 0.0) || !(s.tempering > 0.0)) {
              throw DomainError("tempered: scale and tempering must be positive");
            }
            if (!driver && s.alpha >= 1.0) {
              throw IntegrabilityError("tempered measure needs alpha < 1 to act as a subordinator");
            }
          } else if constexpr (std::is_same_v<T, FiniteActivity>) {
            if (!(s.rate > 0.0)) throw DomainError("finite: rate must be positive");
            if (s.law.kind == JumpLaw::Kind::Uniform) {
              if (!(s.law.a >= 0.0 && s.law.b > s.law.a)) throw DomainError("finite: uniform law needs 0 <= lo < hi");
            } else if (!(s.law.a > 0.0)) {
              throw DomainError("finite: exponential mean must be positive");
            }
          } else if constexpr (std::is_same_v<T, PointMass>) {
            if (!(s.location > 0.0) || !(s.mass > 0.0)) {
              throw DomainError("point: location and mass must be positive");
            }
          } else {
            validate_tabulated(s, driver);
          }
        },
        shape_);
    const double c = contract_integral();
    if (!std::isfinite(c)) throw IntegrabilityError("measure violates its integrability contract");
  }

  static void validate_tabulated(const Tabulated& t, bool driver) {
    if (t.knots.size() < 2 || t.knots.size() != t.density.size()) {
      throw DomainError("tabulated: need at least two knots with matching density values");
    }
    if (!(t.knots.front() > 0.0)) throw DomainError("tabulated: knots must be positive");
    for (std::size_t i = 1; i < t.knots.size(); ++i) {
      if (!(t.knots[i] > t.knots[i - 1])) throw DomainError("tabulated: knots must be strictly increasing");
    }
    for (double d : t.density) {
      if (!(d >= 0.0) || !std::isfinite(d)) throw DomainError("tabulated: density must be finite and non-negative");
    }
    if (t.lower.kind == TailDescriptor::Kind::Exponential) {
      throw DomainError("tabulated: lower tail must be none or power");
    }
    if (t.lower.kind == TailDescriptor::Kind::Power) {
      const double need = driver ? -3.0 : -2.0;
      if (!(t.lower.value > need)) {
        throw IntegrabilityError("tabulated: lower power tail too singular for the measure's role");
      }
    }
    if (t.upper.kind == TailDescriptor::Kind::Power) {
      const double need = driver ? -2.0 : -1.0;
      if (!(t.upper.value < need)) {
        throw IntegrabilityError("tabulated: upper power tail too heavy for the measure's role");
      }
    }
    if (t.upper.kind == TailDescriptor::Kind::Exponential && !(t.upper.value > 0.0)) {
      throw DomainError("tabulated: exponential tail rate must be positive");
    }
  }

  MeasureShape shape_;
  MeasureRole role_;
};

/// Reads a two-column (abscissa, density) table; '#' starts a comment.
inline Tabulated read_tabulated(std::istream& in, TailDescriptor lower = {}, TailDescriptor upper = {}) {
  Tabulated t;
  t.lower = lower;
  t.upper = upper;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    double z = 0.0, d = 0.0;
    if (!(ls >> z)) continue;
    if (!(ls >> d)) throw FormatError("tabulated measure: missing density on line " + std::to_string(line_no));
    if (!t.knots.empty() && !(z > t.knots.back())) {
      throw FormatError("tabulated measure: abscissae not strictly increasing at line " + std::to_string(line_no));
    }
    t.knots.push_back(z);
    t.density.push_back(d);
  }
  return t;
}

inline Tabulated read_tabulated_file(const std::string& path, TailDescriptor lower = {},
                                     TailDescriptor upper = {}) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open tabulated measure file " + path);
  return read_tabulated(in, lower, upper);
}

// ---------------------------------------------------------------------------
// Tail functionals

/// G(x): integral of z over (x, inf).
inline double tail_first_moment(const LevyMeasure& m, double x) { return m.tail_first_moment(x); }

/// H(x): integral of z^2 over (0, x].
inline double truncated_second_moment(const LevyMeasure& m, double x) {
  return m.truncated_second_moment(x);
}

/// Log-spaced abscissae x_min .. x_max.
struct LogGrid {
  double x_min = 1e-8;
  double x_max = 1.0;
  int points_per_decade = 10;

  double decades() const { return std::log10(x_max / x_min); }

  std::vector<double> points() const {
    const int n = static_cast<int>(std::lround(decades() * points_per_decade));
    std::vector<double> xs(static_cast<std::size_t>(n) + 1);
    const double l0 = std::log10(x_min);
    const double l1 = std::log10(x_max);
    for (int i = 0; i <= n; ++i) xs[static_cast<std::size_t>(i)] = std::pow(10.0, l0 + (l1 - l0) * i / n);
    xs.front() = x_min;
    xs.back() = x_max;
    return xs;
  }
};

/// Cached G and H on a log grid.
struct TailFunctions {
  std::vector<double> x;
  std::vector<double> G;
  std::vector<double> H;

  static TailFunctions tabulate(const LevyMeasure& m, const LogGrid& grid) {
    TailFunctions t;
    t.x = grid.points();
    t.G.reserve(t.x.size());
    t.H.reserve(t.x.size());
    for (double x : t.x) {
      t.G.push_back(m.tail_first_moment(x));
      t.H.push_back(m.truncated_second_moment(x));
    }
    return t;
  }
};

namespace detail {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms_residual = 0.0;
};

inline LineFit least_squares(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (f.intercept + f.slope * xs[i]);
    ss += r * r;
  }
  f.rms_residual = std::sqrt(ss / n);
  return f;
}

/// Scan points in the smallest decade [x_min, 10 x_min].
inline std::vector<double> smallest_decade(const LogGrid& scan) {
  std::vector<double> out;
  for (double x : scan.points()) {
    if (x <= scan.x_min * 10.0 * (1.0 + 1e-12)) out.push_back(x);
  }
  return out;
}

}  // namespace detail

struct AlphaEstimate {
  double alpha = 1.0;  // clamped to [1, 2]
  double raw = 1.0;    // 1 - slope before clamping
  double slope = 0.0;  // fitted d log G / d log x
  double residual = 0.0;
};

/// Critical small-tail exponent: the infimum of beta > 1 with
/// x^(beta-1) G(x) -> 0, estimated from the log-log slope of G over the
/// smallest decade of the scan.
inline AlphaEstimate estimate_alpha_nu(const LevyMeasure& m, const LogGrid& scan = {}) {
  if (scan.decades() < 4.0 - 1e-9) throw DomainError("estimate_alpha_nu: scan must cover at least 4 decades");
  const auto xs = detail::smallest_decade(scan);
  std::vector<double> lx, lg;
  for (double x : xs) {
    const double g = m.tail_first_moment(x);
    if (g > 0.0) {
      lx.push_back(std::log(x));
      lg.push_back(std::log(g));
    }
  }
  AlphaEstimate est;
  if (lx.size() < 2) {
    // No mass reaches the scan: G vanishes near 0 and every beta > 1 qualifies.
    return est;
  }
  const auto fit = detail::least_squares(lx, lg);
  est.slope = fit.slope;
  est.residual = fit.rms_residual;
  est.raw = 1.0 - fit.slope;
  constexpr double kMaxResidual = 0.05;
  if (fit.rms_residual > kMaxResidual) {
    throw EstimationError("estimate_alpha_nu: log-log slope fit did not converge", fit.rms_residual);
  }
  if (est.raw < 0.9 || est.raw > 2.1) {
    throw EstimationError("estimate_alpha_nu: raw exponent " + std::to_string(est.raw) + " outside [0.9, 2.1]",
                          fit.rms_residual);
  }
  est.alpha = std::clamp(est.raw, 1.0, 2.0);
  return est;
}

struct DecayCheck {
  bool pass = false;
  std::vector<double> x;
  std::vector<double> values;  // x^(alpha-2) H(x)
  double slope = 0.0;          // log-log slope over the smallest decade
};

/// Checks x^(alpha-2) H(x) -> 0 as x -> 0+ along the scan grid. Passes when
/// the trace is non-increasing toward 0 and either vanishes there or decays
/// like a positive power.
inline DecayCheck check_small_jump_decay(const LevyMeasure& m, double alpha, const LogGrid& scan = {}) {
  DecayCheck out;
  out.x = scan.points();
  for (double x : out.x) out.values.push_back(std::pow(x, alpha - 2.0) * m.truncated_second_moment(x));

  bool monotone = true;
  for (std::size_t i = 0; i + 1 < out.values.size(); ++i) {
    if (out.values[i] > out.values[i + 1] * (1.0 + 1e-9) + 1e-300) monotone = false;
  }
  const auto small = detail::smallest_decade(scan);
  std::vector<double> lx, lv;
  double small_max = 0.0;
  for (std::size_t i = 0; i < small.size(); ++i) {
    small_max = std::max(small_max, out.values[i]);
    if (out.values[i] > 0.0) {
      lx.push_back(std::log(out.x[i]));
      lv.push_back(std::log(out.values[i]));
    }
  }
  constexpr double kVanish = 1e-12;
  constexpr double kMinSlope = 0.01;
  if (lx.size() >= 2) out.slope = detail::least_squares(lx, lv).slope;
  out.pass = monotone && (small_max <= kVanish || out.slope >= kMinSlope);
  return out;
}

/// Integral of (e^{-uz} - 1 + uz) against a driver measure.
inline double laplace_exponent(const LevyMeasure& m, double u) {
  if (m.role() != MeasureRole::CompensatedDriver) {
    throw DomainError("laplace_exponent: measure must be a compensated driver");
  }
  if (u < 0.0) throw DomainError("laplace_exponent: u must be non-negative");
  if (u == 0.0) return 0.0;
  auto kernel = [u](double z) {
    const double v = u * z;
    if (v < 1e-4) return v * v * (0.5 - v * (1.0 / 6.0 - v / 24.0));
    return std::expm1(-v) + v;
  };
  quad::Tolerance tol;
  tol.absolute = 1e-12;
  tol.relative = 1e-10;
  return m.integrate(kernel, 0.0, std::numeric_limits<double>::infinity(), {}, tol);
}

/// Closed form of laplace_exponent(stable(alpha, scale), 1):
/// scale * Gamma(2 - alpha) / (alpha (alpha - 1)).
inline double stable_laplace_coefficient(double alpha, double scale = 1.0) {
  return scale * std::tgamma(2.0 - alpha) / (alpha * (alpha - 1.0));
}

}  // namespace jsde
