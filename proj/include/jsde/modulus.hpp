#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "jsde/errors.hpp"
#include "jsde/quadrature.hpp"

namespace jsde {

/// Non-decreasing modulus of continuity z -> rho(z) on [0, inf).
///   Power      scale * z^gamma
///   LogOsgood  scale * z * log(1/z) for z <= 1/e, constant scale/e above
///   Linear     slope * z
///   Tabulated  piecewise power law through (knot, value) pairs; the first
///              and last segment exponents extend to 0 and infinity
struct Modulus {
  enum class Family { Power, LogOsgood, Linear, Tabulated };

  Family family = Family::Power;
  double exponent = 0.5;
  double scale = 1.0;
  std::vector<double> knots;
  std::vector<double> values;
  bool declared_concave = false;

  static Modulus power(double gamma, double scale = 1.0) {
    Modulus m;
    m.family = Family::Power;
    m.exponent = gamma;
    m.scale = scale;
    m.declared_concave = gamma <= 1.0;
    m.validate();
    return m;
  }
  static Modulus linear(double slope) {
    Modulus m;
    m.family = Family::Linear;
    m.exponent = 1.0;
    m.scale = slope;
    m.declared_concave = true;
    m.validate();
    return m;
  }
  static Modulus log_osgood(double scale = 1.0) {
    Modulus m;
    m.family = Family::LogOsgood;
    m.exponent = 1.0;
    m.scale = scale;
    m.declared_concave = true;
    m.validate();
    return m;
  }
  static Modulus tabulated(std::vector<double> knots, std::vector<double> values, bool concave = false) {
    Modulus m;
    m.family = Family::Tabulated;
    m.knots = std::move(knots);
    m.values = std::move(values);
    m.declared_concave = concave;
    m.validate();
    return m;
  }

  void validate() const {
    switch (family) {
      case Family::Power:
        if (!(exponent > 0.0) || !(scale > 0.0)) throw DomainError("power modulus needs exponent > 0 and scale > 0");
        break;
      case Family::Linear:
        if (!(scale >= 0.0)) throw DomainError("linear modulus needs a non-negative slope");
        break;
      case Family::LogOsgood:
        if (!(scale > 0.0)) throw DomainError("log-osgood modulus needs scale > 0");
        break;
      case Family::Tabulated:
        if (knots.size() < 2 || knots.size() != values.size()) {
          throw DomainError("tabulated modulus needs at least two (knot, value) pairs");
        }
        for (std::size_t i = 0; i < knots.size(); ++i) {
          if (!(knots[i] > 0.0) || !(values[i] > 0.0)) throw DomainError("tabulated modulus: knots and values must be positive");
          if (i > 0 && (!(knots[i] > knots[i - 1]) || values[i] < values[i - 1])) {
            throw DomainError("tabulated modulus must be strictly increasing in z and non-decreasing in value");
          }
        }
        break;
    }
  }

  std::string describe() const {
    std::ostringstream os;
    switch (family) {
      case Family::Power: os << "power:" << exponent; if (scale != 1.0) os << ":" << scale; break;
      case Family::Linear: os << "linear:" << scale; break;
      case Family::LogOsgood: os << "log-osgood:" << scale; break;
      case Family::Tabulated: os << "tabulated[" << knots.size() << "]"; break;
    }
    return os.str();
  }

  double operator()(double z) const {
    if (!(z > 0.0)) return 0.0;
    switch (family) {
      case Family::Power: return scale * std::pow(z, exponent);
      case Family::Linear: return scale * z;
      case Family::LogOsgood: return z <= std::exp(-1.0) ? scale * z * std::log(1.0 / z) : scale * std::exp(-1.0);
      case Family::Tabulated: {
        const std::size_t i = segment(z);
        return values[i] * std::pow(z / knots[i], segment_exponent(i));
      }
    }
    return 0.0;
  }

  /// Exponent governing the behaviour at 0 (rho ~ z^gamma).
  double small_exponent() const {
    switch (family) {
      case Family::Power: return exponent;
      case Family::Linear: return 1.0;
      case Family::LogOsgood: return 1.0;
      case Family::Tabulated: return segment_exponent(0);
    }
    return 1.0;
  }

  std::size_t segment(double z) const {
    const auto it = std::upper_bound(knots.begin(), knots.end(), z);
    std::size_t i = it == knots.begin() ? 0 : static_cast<std::size_t>(it - knots.begin()) - 1;
    return std::min(i, knots.size() - 2);
  }

  double segment_exponent(std::size_t i) const {
    return std::log(values[i + 1] / values[i]) / std::log(knots[i + 1] / knots[i]);
  }

  /// Lambda(s) = integral of rho^-2 over (e^s, 1], for s <= 0. Works in
  /// log space so that levels far below the double range stay usable.
  double inverse_square_from_one(double s) const {
    if (s >= 0.0) return 0.0;
    switch (family) {
      case Family::Power: return power_piece(scale, exponent, s, 0.0);
      case Family::Linear:
        if (scale == 0.0) return std::numeric_limits<double>::infinity();
        return power_piece(scale, 1.0, s, 0.0);
      case Family::LogOsgood: return log_osgood_lambda(s);
      case Family::Tabulated: return tabulated_lambda(s);
    }
    return 0.0;
  }

 private:
  /// Integral of (c * z^g)^-2 dz over z in (e^s0, e^s1].
  static double power_piece(double c, double g, double s0, double s1) {
    const double e = 1.0 - 2.0 * g;
    const double c2 = c * c;
    if (e == 0.0) return (s1 - s0) / c2;
    // (e^{e s1} - e^{e s0}) / e, written to keep precision for small e*(s1-s0)
    return std::exp(e * s1) * -std::expm1(e * (s0 - s1)) / e / c2;
  }

  double log_osgood_lambda(double s) const {
    const double s_knee = -1.0;
    const double c2 = scale * scale;
    double total = 0.0;
    const double s_hi = std::min(0.0, std::max(s, s_knee));
    // constant part rho = scale / e on (1/e, 1]
    if (s_hi < 0.0) total += (1.0 - std::exp(s_hi)) * std::exp(2.0) / c2;
    if (s < s_knee) {
      // integrand in t = log z: e^{-t} / (scale^2 t^2)
      auto f = [c2](double t) { return std::exp(-t) / (c2 * t * t); };
      quad::Tolerance tol;
      tol.absolute = 0.0;
      tol.relative = 1e-11;
      total += quad::integrate(f, s, s_knee, tol);
    }
    return total;
  }

  double tabulated_lambda(double s) const {
    std::vector<double> logk(knots.size());
    for (std::size_t i = 0; i < knots.size(); ++i) logk[i] = std::log(knots[i]);
    // segment i covers [knots[i], knots[i+1]); the first reaches down to 0, the last up to infinity
    std::size_t i = segment(1.0);
    if (i > 0 && knots[i] == 1.0) --i;
    double total = 0.0;
    double cursor = 0.0;
    while (cursor > s) {
      const double seg_lo = std::max(i == 0 ? -std::numeric_limits<double>::infinity() : logk[i], s);
      const double g = segment_exponent(i);
      // rho(z) = C z^g on this segment
      const double logC = std::log(values[i]) - g * logk[i];
      const double e = 1.0 - 2.0 * g;
      if (e == 0.0) {
        total += (cursor - seg_lo) * std::exp(-2.0 * logC);
      } else {
        total += std::exp(e * cursor - 2.0 * logC) * -std::expm1(e * (seg_lo - cursor)) / e;
      }
      cursor = seg_lo;
      if (i == 0) break;
      --i;
    }
    return total;
  }
};

enum class OsgoodKind { RIntegral, RhoSquared, StableCritical };

inline const char* to_string(OsgoodKind k) {
  switch (k) {
    case OsgoodKind::RIntegral: return "r-integral";
    case OsgoodKind::RhoSquared: return "rho-squared-integral";
    case OsgoodKind::StableCritical: return "stable-critical-integral";
  }
  return "?";
}

enum class Divergence { Diverges, Converges, Inconclusive };

inline const char* to_string(Divergence d) {
  switch (d) {
    case Divergence::Diverges: return "diverges";
    case Divergence::Converges: return "converges";
    case Divergence::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct OsgoodVerdict {
  Divergence verdict = Divergence::Inconclusive;
  double integrand_exponent = 0.0;  // e in the integrand rho^-e
  double small_exponent = 0.0;      // gamma in rho ~ z^gamma near 0
  std::string analysis;
};

/// Divergence of the integral of rho^-e near 0, with e = 1, 2 or alpha/(alpha-1).
inline OsgoodVerdict osgood_diverges(const Modulus& rho, OsgoodKind kind, double alpha = 0.0) {
  OsgoodVerdict v;
  v.small_exponent = rho.small_exponent();
  switch (kind) {
    case OsgoodKind::RIntegral: v.integrand_exponent = 1.0; break;
    case OsgoodKind::RhoSquared: v.integrand_exponent = 2.0; break;
    case OsgoodKind::StableCritical:
      if (!(alpha > 1.0 && alpha < 2.0)) throw DomainError("stable-critical check needs alpha in (1, 2)");
      v.integrand_exponent = alpha / (alpha - 1.0);
      break;
  }
  auto power_rule = [&](double g) {
    // integral of z^{-g e} diverges iff g e >= 1
    bool div = false;
    if (kind == OsgoodKind::RIntegral) div = g >= 1.0;
    else if (kind == OsgoodKind::RhoSquared) div = 2.0 * g >= 1.0;
    else div = std::fma(g, alpha, -(alpha - 1.0)) >= 0.0;  // g alpha >= alpha - 1
    return div ? Divergence::Diverges : Divergence::Converges;
  };
  switch (rho.family) {
    case Modulus::Family::Power:
    case Modulus::Family::Linear:
      if (rho.family == Modulus::Family::Linear && rho.scale == 0.0) {
        v.verdict = Divergence::Diverges;
        v.analysis = "rho vanishes identically";
        return v;
      }
      v.verdict = power_rule(v.small_exponent);
      v.analysis = "z^-(" + std::to_string(v.small_exponent) + "*" + std::to_string(v.integrand_exponent) +
                   ") near 0";
      return v;
    case Modulus::Family::LogOsgood:
      // (z log 1/z)^-e diverges for every e >= 1
      v.verdict = Divergence::Diverges;
      v.analysis = "(z log(1/z))^-e with e >= 1";
      return v;
    case Modulus::Family::Tabulated: {
      // shrinking dyadic intervals below the first knot; the extrapolated
      // power law decides, but confirm numerically on the table itself
      const double g = v.small_exponent;
      const double ge = g * v.integrand_exponent;
      double prev = 0.0;
      double ratio = 0.0;
      const double z0 = rho.knots.front();
      for (int j = 0; j < 40; ++j) {
        const double hi = z0 * std::ldexp(1.0, -j);
        const double lo = hi / 2.0;
        const double e = v.integrand_exponent;
        auto f = [&](double z) { return std::pow(rho(z), -e); };
        const double piece = quad::gauss10(f, lo, hi);
        if (j > 0) ratio = piece / prev;
        prev = piece;
      }
      if (ratio >= 1.0 - 1e-9) v.verdict = Divergence::Diverges;
      else if (ratio <= 1.0 - 1e-3) v.verdict = Divergence::Converges;
      else v.verdict = Divergence::Inconclusive;
      // cross-check with the exponent rule away from the boundary, where the
      // exponent recovered from logs is exact enough to decide
      if (v.verdict != Divergence::Inconclusive && std::abs(ge - 1.0) > 1e-9 && v.verdict != power_rule(g)) {
        v.verdict = Divergence::Inconclusive;
      }
      v.analysis = "dyadic piece ratio " + std::to_string(ratio) + ", exponent product " + std::to_string(ge);
      return v;
    }
  }
  return v;
}

}  // namespace jsde
