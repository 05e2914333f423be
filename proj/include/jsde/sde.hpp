#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jsde/errors.hpp"
#include "jsde/levy_measure.hpp"
#include "jsde/modulus.hpp"
#include "jsde/noise.hpp"
#include "jsde/rng.hpp"

namespace jsde {

using ScalarFn = std::function<double(double)>;
using JumpFn = std::function<double(double x, double z)>;

/// Declared regularity metadata, checked (not proved) by check_hypotheses.
struct Regularity {
  double K = std::numeric_limits<double>::quiet_NaN();         // square growth bound
  double K_linear = std::numeric_limits<double>::quiet_NaN();  // |sigma|+|b|+|h0|+|h1| <= K(1+|x|)
  double K_nonneg = std::numeric_limits<double>::quiet_NaN();  // one-sided bound on x >= 0
  double p = std::numeric_limits<double>::quiet_NaN();
  std::optional<Modulus> rho;
  std::optional<Modulus> r;
  std::optional<Modulus> h0_modulus;  // modulus of h0 itself (pure jump equations)
  bool nonneg_structure = false;
  double envelope = 1.0;  // jump envelope f(z) = envelope * z
};

struct CbiParams {
  double a = 1.0;
  double b = 0.0;
  double beta = 0.0;
  double c = 1.0;
  double r = 2.0;
  double q = 1.5;
};

/// Coefficients of
///   dx = sigma(x-) dB + g0(x-, z) compensated N0 + (b1 - b2)(x-) dt + g1(x-, z) N1.
/// When g0/g1 are empty the multiplicative forms h0(x) z and h1(x) z are used.
struct SdeSystem {
  std::string name;
  std::string family = "custom";
  std::map<std::string, double> params;
  ScalarFn sigma;
  ScalarFn b1;
  ScalarFn b2;
  ScalarFn h0;
  ScalarFn h1;
  JumpFn g0;
  JumpFn g1;
  Regularity reg;
  std::optional<CbiParams> cbi;

  double diffusion(double x) const { return sigma ? sigma(x) : 0.0; }
  double drift(double x) const { return (b1 ? b1(x) : 0.0) - (b2 ? b2(x) : 0.0); }
  bool multiplicative0() const { return !g0; }
  bool multiplicative1() const { return !g1; }
  double h0_at(double x) const { return h0 ? h0(x) : 0.0; }
  double h1_at(double x) const { return h1 ? h1(x) : 0.0; }
  double jump0(double x, double z) const { return g0 ? g0(x, z) : h0_at(x) * z; }
  double jump1(double x, double z) const { return g1 ? g1(x, z) : h1_at(x) * z; }
  bool has_jump0() const { return static_cast<bool>(g0) || static_cast<bool>(h0); }
  bool has_jump1() const { return static_cast<bool>(g1) || static_cast<bool>(h1); }

  /// Randomized checks of the structural invariants; throws SpecError.
  void spot_check(std::uint64_t seed = 0x5eed) const {
    const RandomStream rs(seed, 0);
    Lane lane(rs, Purpose::Generic);
    for (int i = 0; i < 200; ++i) {
      double x = 20.0 * (lane.uniform() - 0.5);
      double y = 20.0 * (lane.uniform() - 0.5);
      if (x > y) std::swap(x, y);
      const double z = std::exp(8.0 * (lane.uniform() - 0.5));
      if (has_jump0() && jump0(x, z) > jump0(y, z) + 1e-12 * (1.0 + std::abs(jump0(y, z)))) {
        throw SpecError("g0 is not non-decreasing in x near (" + std::to_string(x) + ", " + std::to_string(y) + ")");
      }
      if (b2 && b2(x) > b2(y) + 1e-12 * (1.0 + std::abs(b2(y)))) {
        throw SpecError("b2 is not non-decreasing near (" + std::to_string(x) + ", " + std::to_string(y) + ")");
      }
    }
    if (reg.nonneg_structure) {
      if (diffusion(0.0) != 0.0) throw SpecError("nonneg structure needs sigma(0) = 0");
      if (drift(0.0) < 0.0) throw SpecError("nonneg structure needs b(0) >= 0");
      for (int i = 0; i < 50; ++i) {
        const double z = std::exp(8.0 * (lane.uniform() - 0.5));
        const double x = 10.0 * lane.uniform();
        if (has_jump0() && jump0(0.0, z) != 0.0) throw SpecError("nonneg structure needs g0(0, z) = 0");
        if (has_jump1() && jump1(x, z) + x < 0.0) throw SpecError("nonneg structure needs g1(x, z) + x >= 0");
      }
    }
  }
};

namespace systems {

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

inline SdeSystem zero() {
  SdeSystem s;
  s.name = "zero";
  s.family = "zero";
  s.reg.K = 0.0;
  s.reg.K_linear = 0.0;
  s.reg.K_nonneg = 0.0;
  s.reg.rho = Modulus::power(0.5);
  s.reg.r = Modulus::linear(0.0);
  s.reg.p = 0.5;
  return s;
}

/// sigma(x) = s x + s0, b(x) = beta x + b0.
inline SdeSystem linear(double s, double beta, double s0 = 0.0, double b0 = 0.0) {
  SdeSystem sys;
  sys.name = "linear";
  sys.family = "linear";
  sys.params = {{"sigma", s}, {"beta", beta}, {"sigma0", s0}, {"b", b0}};
  sys.sigma = [s, s0](double x) { return s * x + s0; };
  sys.b1 = [beta, b0](double x) { return beta * x + b0; };
  // (s x + s0)^2 + (beta x + b0)^2 <= 2(s^2 + beta^2) x^2 + 2(s0^2 + b0^2)
  if (s0 == 0.0 && b0 == 0.0) sys.reg.K = s * s + beta * beta;
  else sys.reg.K = 2.0 * std::max(s * s + beta * beta, s0 * s0 + b0 * b0);
  sys.reg.K_linear = std::max(std::abs(s) + std::abs(beta), std::abs(s0) + std::abs(b0));
  sys.reg.K_nonneg = std::max(beta, b0);
  sys.reg.rho = Modulus::linear(std::abs(s) > 0.0 ? std::abs(s) : 1.0);
  sys.reg.r = Modulus::linear(std::abs(beta));
  sys.reg.p = 0.5;
  return sys;
}

/// Pure Brownian motion scaled by s.
inline SdeSystem brownian(double s = 1.0) {
  SdeSystem sys = linear(0.0, 0.0, s, 0.0);
  sys.name = "brownian";
  sys.reg.K = s * s;
  return sys;
}

/// dx = h dL0 with constant h.
inline SdeSystem additive(double h = 1.0) {
  SdeSystem sys;
  sys.name = "additive";
  sys.family = "additive";
  sys.params = {{"h0", h}};
  sys.h0 = [h](double) { return h; };
  sys.reg.K_linear = std::abs(h);
  sys.reg.rho = Modulus::power(0.5);
  sys.reg.r = Modulus::linear(0.0);
  sys.reg.p = 0.5;
  return sys;
}

/// Constant for which x^g + y^g <= C |x - y|^g on opposite signs: 2^(1-g).
inline double holder_sign_constant(double g) { return std::pow(2.0, 1.0 - g); }

/// Modulus dominating A d^(1/r) + B d^(1/2).
inline Modulus cbi_modulus(double A, double B, double r) {
  if (A + B == 0.0) return Modulus::power(0.5);
  if (r == 2.0) return Modulus::power(0.5, A + B);
  const double s = A + B;
  return Modulus::tabulated({0.5, 1.0, 2.0}, {s * std::sqrt(0.5), s, s * std::pow(2.0, 1.0 / r)});
}

/// dx = (a|x|)^(1/r) dB + sign(x)(c|x|)^(1/q) dL0 + (beta x + b) dt + dL1.
inline SdeSystem cbi(const CbiParams& p, bool immigration_jumps = true) {
  if (!(p.r > 0.0) || !(p.q > 0.0)) throw DomainError("cbi: r and q must be positive");
  SdeSystem sys;
  sys.name = "cbi";
  sys.family = "cbi";
  sys.cbi = p;
  sys.params = {{"a", p.a}, {"b", p.b}, {"beta", p.beta}, {"c", p.c}, {"r", p.r}, {"q", p.q}};
  const double a = p.a, c = p.c, r = p.r, q = p.q, beta = p.beta, b = p.b;
  sys.sigma = [a, r](double x) { return std::pow(a * std::abs(x), 1.0 / r); };
  sys.h0 = [c, q](double x) { return sgn(x) * std::pow(c * std::abs(x), 1.0 / q); };
  sys.b1 = [beta, b](double x) { return beta * x + b; };
  if (immigration_jumps) sys.h1 = [](double) { return 1.0; };
  // |x|^g <= 1 + |x| for g <= 1
  const double ka = std::pow(a, 1.0 / r), kc = std::pow(c, 1.0 / q);
  sys.reg.K_linear = ka + kc + std::max(std::abs(beta), std::abs(b) + (immigration_jumps ? 1.0 : 0.0));
  sys.reg.K_nonneg = std::max(beta, 0.0) + b + (immigration_jumps ? 1.0 : 0.0);
  sys.reg.p = 1.0 / q;
  const double A = holder_sign_constant(1.0 / r) * std::pow(a, 1.0 / r);
  const double B = std::pow(holder_sign_constant(1.0 / q), q / 2.0) * std::sqrt(c);
  sys.reg.rho = cbi_modulus(A, B, r);
  sys.reg.r = Modulus::linear(std::abs(beta));
  sys.reg.nonneg_structure = true;
  return sys;
}

/// CBI-style template with a power jump coefficient:
/// sigma = (a|x|)^(1/r), g0 = sign(x)|x|^p z, b = beta x + b.
inline SdeSystem power_jump(double p_exp, double a = 1.0, double r = 2.0, double beta = 0.0, double b = 0.0) {
  SdeSystem sys;
  sys.name = "power-jump";
  sys.family = "power-jump";
  sys.params = {{"p", p_exp}, {"a", a}, {"r", r}, {"beta", beta}, {"b", b}};
  sys.sigma = [a, r](double x) { return std::pow(a * std::abs(x), 1.0 / r); };
  sys.h0 = [p_exp](double x) { return sgn(x) * std::pow(std::abs(x), p_exp); };
  sys.b1 = [beta, b](double x) { return beta * x + b; };
  const double ka = std::pow(a, 1.0 / r);
  sys.reg.K_linear = ka + 1.0 + std::max(std::abs(beta), std::abs(b));
  sys.reg.K_nonneg = std::max(beta, 0.0) + b;
  sys.reg.p = p_exp;
  const double A = holder_sign_constant(1.0 / r) * ka;
  const double B = std::pow(holder_sign_constant(p_exp), 1.0 / (2.0 * p_exp));
  sys.reg.rho = cbi_modulus(A, B, r);
  sys.reg.r = Modulus::linear(std::abs(beta));
  sys.reg.nonneg_structure = true;
  return sys;
}

/// dx = F(x-) dL0 with F(x) = sign(x) |x|^p (the pure stable-driven equation).
inline SdeSystem pure_stable(double p_exp) {
  SdeSystem sys;
  sys.name = "pure-stable";
  sys.family = "pure-stable";
  sys.params = {{"p", p_exp}};
  sys.h0 = [p_exp](double x) { return sgn(x) * std::pow(std::abs(x), p_exp); };
  sys.reg.K_linear = 1.0;
  sys.reg.p = p_exp;
  sys.reg.h0_modulus = Modulus::power(p_exp, holder_sign_constant(p_exp));
  sys.reg.rho = Modulus::power(0.5, std::pow(holder_sign_constant(p_exp), 1.0 / (2.0 * p_exp)));
  sys.reg.r = Modulus::linear(0.0);
  return sys;
}

}  // namespace systems

enum class SimMode { Plain, Truncated, Nonneg, NonnegTruncated };

inline const char* to_string(SimMode m) {
  switch (m) {
    case SimMode::Plain: return "plain";
    case SimMode::Truncated: return "truncated";
    case SimMode::Nonneg: return "nonneg";
    case SimMode::NonnegTruncated: return "nonneg-truncated";
  }
  return "?";
}

enum class Record { Full, Grid, Terminal };

struct SimOptions {
  SimMode mode = SimMode::Plain;
  double m = std::numeric_limits<double>::infinity();
  Record record = Record::Full;
};

/// Solution states; at a jump epoch the stored value is the post-jump state.
struct SolutionPath {
  std::vector<double> times;
  std::vector<double> states;
  std::vector<double> sup_sq;  // running sup of x^2 up to and including each stored time
  bool truncation_hit = false;
  std::uint64_t clamp_count = 0;
  std::uint64_t steps = 0;
  double min_state = std::numeric_limits<double>::infinity();
  double terminal = 0.0;
  double terminal_sup_sq = 0.0;
};

namespace detail {

inline double chi(double x, double m) { return std::clamp(x, -m, m); }

/// Drift pieces that depend on the measures and the noise model.
struct DriftCompensation {
  const SdeSystem* sys;
  const NoiseModel* model;
  bool truncated;
  double m;

  double jump_drift(double xh) const {
    double out = 0.0;
    const double eps = model->epsilon;
    if (sys->has_jump0() && model->spec.nu0) {
      const LevyMeasure& nu0 = *model->spec.nu0;
      if (sys->multiplicative0()) {
        const double h = sys->h0_at(xh);
        out -= h * model->large_mean0;
        if (truncated && h != 0.0) {
          // integral over (0, eps] of g0 - chi(g0); non-zero only when m/|h| < eps
          const double ah = std::abs(h);
          const double cut = m / ah;
          if (cut < eps) {
            const double part = ah * (nu0.tail_first_moment(cut) - model->large_mean0) -
                                m * (nu0.tail_mass(cut) - model->rate0);
            out -= systems::sgn(h) * part;
          }
        }
      } else {
        const double inf = std::numeric_limits<double>::infinity();
        auto large = [&](double z) {
          const double g = sys->jump0(xh, z);
          return truncated ? chi(g, m) : g;
        };
        out -= nu0.integrate(large, eps, inf);
        if (truncated) {
          auto excess = [&](double z) {
            const double g = sys->jump0(xh, z);
            return g - chi(g, m);
          };
          out -= nu0.integrate(excess, 0.0, eps);
        }
      }
    }
    if (sys->has_jump1() && model->spec.nu1 && model->epsilon1 > 0.0) {
      if (sys->multiplicative1()) {
        out += sys->h1_at(xh) * model->small_mean1;
      } else {
        out += model->spec.nu1->integrate([&](double z) { return sys->jump1(xh, z); }, 0.0, model->epsilon1);
      }
    }
    return out;
  }

  /// Multiplier of the aggregated small-jump increment.
  double small_multiplier(double xh) const {
    if (!sys->has_jump0() || model->mode != SmallJumpMode::GaussianSubstitute) return 0.0;
    if (sys->multiplicative0()) return sys->h0_at(xh);
    // least-squares coefficient of g0 on z over the small jumps
    const double num =
        model->spec.nu0->integrate([&](double z) { return sys->jump0(xh, z) * z; }, 0.0, model->epsilon);
    return num / model->small_variance0;
  }
};

}  // namespace detail

/// Jump-adapted Euler scheme driven by a fixed noise path.
inline SolutionPath simulate(const SdeSystem& sys, double x0, const NoisePath& noise, const SimOptions& opt = {}) {
  if (!noise.model) throw SpecError("noise path carries no model");
  const NoiseModel& model = *noise.model;
  for (const Jump& j : noise.jumps) {
    if (j.mark == Mark::Driver0 && !model.spec.nu0) throw SpecError("driver-0 jump without nu0");
    if (j.mark == Mark::Driver1 && !model.spec.nu1) throw SpecError("driver-1 jump without nu1");
  }
  if (!std::isfinite(x0)) throw DomainError("initial value must be finite");
  const bool truncated = opt.mode == SimMode::Truncated || opt.mode == SimMode::NonnegTruncated;
  const bool nonneg = opt.mode == SimMode::Nonneg || opt.mode == SimMode::NonnegTruncated;
  const double m = truncated ? opt.m : std::numeric_limits<double>::infinity();
  if (truncated && !(m > 0.0)) throw DomainError("truncation level must be positive");
  if (nonneg && x0 < 0.0) throw DomainError("non-negative mode needs x0 >= 0");

  const detail::DriftCompensation comp{&sys, &model, truncated, m};
  auto hat = [&](double x) {
    double h = x;
    if (nonneg) h = std::max(h, 0.0);
    if (truncated) h = detail::chi(h, m);
    return h;
  };

  SolutionPath out;
  double x = x0;
  double sup = x * x;
  out.min_state = x;
  auto store = [&](double t, bool grid_point) {
    if (opt.record == Record::Full || (opt.record == Record::Grid && grid_point)) {
      out.times.push_back(t);
      out.states.push_back(x);
      out.sup_sq.push_back(sup);
    }
  };
  auto after_update = [&](double t) {
    if (!std::isfinite(x)) throw BlowUpError("state left the finite range at t=" + std::to_string(t), t);
    if (nonneg && x < 0.0) {
      x = 0.0;
      ++out.clamp_count;
    }
    if (truncated && std::abs(x) >= m) out.truncation_hit = true;
    sup = std::max(sup, x * x);
    out.min_state = std::min(out.min_state, x);
  };
  if (truncated && std::abs(x) >= m) out.truncation_hit = true;
  store(0.0, true);

  walk_events(noise, [&](const Substep& st) {
    ++out.steps;
    if (st.dt > 0.0) {
      const double xh = hat(x);
      const double drift = sys.drift(xh) + comp.jump_drift(xh);
      double dx = drift * st.dt;
      if (st.dB != 0.0) dx += sys.diffusion(xh) * st.dB;
      if (st.dS != 0.0) dx += comp.small_multiplier(xh) * st.dS;
      x += dx;
      after_update(st.t_end);
    }
    if (st.jump) {
      const double xh = hat(x);
      if (st.jump->mark == Mark::Driver0) {
        if (sys.has_jump0()) {
          const double g = sys.jump0(xh, st.jump->z);
          x += truncated ? detail::chi(g, m) : g;
        }
      } else if (sys.has_jump1()) {
        x += sys.jump1(xh, st.jump->z);
      }
      after_update(st.t_end);
    }
    if (st.jump || st.grid_point) store(st.t_end, st.grid_point);
  });
  out.terminal = x;
  out.terminal_sup_sq = sup;
  if (opt.record == Record::Terminal) {
    out.times.push_back(noise.horizon());
    out.states.push_back(x);
    out.sup_sq.push_back(sup);
  }
  return out;
}

/// Empirical E[1 + sup_{s<=t} x(s)^2] at each stored time of a common grid.
inline std::vector<double> moment_sup_second(const std::vector<SolutionPath>& paths) {
  if (paths.size() < 100) throw DomainError("moment_sup_second needs at least 100 paths");
  const std::size_t n = paths.front().sup_sq.size();
  std::vector<double> out(n, 0.0);
  for (const auto& p : paths) {
    if (p.sup_sq.size() != n) throw DomainError("paths must share a common grid");
    for (std::size_t i = 0; i < n; ++i) out[i] += p.sup_sq[i];
  }
  for (double& v : out) v = 1.0 + v / static_cast<double>(paths.size());
  return out;
}

inline void write_solution_csv(std::ostream& os, const SolutionPath& p) {
  os << "t,x\n";
  os.precision(17);
  for (std::size_t i = 0; i < p.times.size(); ++i) os << p.times[i] << ',' << p.states[i] << '\n';
}

/// Per-time summary over an ensemble on a common grid.
struct EnsembleSummary {
  std::vector<double> times;
  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<double> sup_moment;
  std::uint64_t paths = 0;
  std::uint64_t clamp_total = 0;
  std::uint64_t paths_with_clamps = 0;
  std::uint64_t steps_total = 0;
  double min_state = std::numeric_limits<double>::infinity();

  void add(const SolutionPath& p) {
    if (paths == 0) {
      times = p.times;
      mean.assign(times.size(), 0.0);
      variance.assign(times.size(), 0.0);
      sup_moment.assign(times.size(), 0.0);
    } else if (p.states.size() != times.size()) {
      throw DomainError("ensemble paths must share a common grid");
    }
    ++paths;
    // Welford update per time
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double d = p.states[i] - mean[i];
      mean[i] += d / static_cast<double>(paths);
      variance[i] += d * (p.states[i] - mean[i]);
      sup_moment[i] += (p.sup_sq[i] - sup_moment[i]) / static_cast<double>(paths);
    }
    clamp_total += p.clamp_count;
    paths_with_clamps += p.clamp_count > 0 ? 1 : 0;
    steps_total += p.steps;
    min_state = std::min(min_state, p.min_state);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    std::vector<double> var(variance.size());
    std::vector<double> supm(sup_moment.size());
    for (std::size_t i = 0; i < var.size(); ++i) {
      var[i] = paths > 1 ? variance[i] / static_cast<double>(paths - 1) : 0.0;
      supm[i] = 1.0 + sup_moment[i];
    }
    j["paths"] = paths;
    j["t"] = times;
    j["mean"] = mean;
    j["variance"] = var;
    j["sup_moment"] = supm;
    j["clamps"] = {{"total", clamp_total},
                   {"paths_with_clamps", paths_with_clamps},
                   {"per_step", steps_total ? static_cast<double>(clamp_total) / static_cast<double>(steps_total) : 0.0}};
    j["min_state"] = min_state;
    return j;
  }
};

}  // namespace jsde
