#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jsde/config.hpp"
#include "jsde/errors.hpp"
#include "jsde/lab.hpp"
#include "jsde/levy_measure.hpp"
#include "jsde/modulus.hpp"
#include "jsde/noise.hpp"
#include "jsde/sde.hpp"

namespace jsde {

/// "power:g[:scale]", "linear:slope", "log[:scale]".
inline Modulus parse_modulus(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const auto colon = text.find(':', start);
    parts.push_back(text.substr(start, colon == std::string::npos ? std::string::npos : colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  auto num = [&](std::size_t i) {
    const Scalar s = detail::parse_scalar(parts.at(i));
    if (const auto* d = std::get_if<double>(&s)) return *d;
    if (const auto* n = std::get_if<std::int64_t>(&s)) return static_cast<double>(*n);
    throw FormatError("modulus parameter is not a number: " + parts.at(i));
  };
  const std::string& kind = parts.front();
  if (kind == "power" && (parts.size() == 2 || parts.size() == 3)) {
    return Modulus::power(num(1), parts.size() == 3 ? num(2) : 1.0);
  }
  if (kind == "linear" && parts.size() == 2) return Modulus::linear(num(1));
  if (kind == "log" && parts.size() <= 2) return Modulus::log_osgood(parts.size() == 2 ? num(1) : 1.0);
  throw FormatError("unknown modulus '" + text + "' (power:g[:scale], linear:slope, log[:scale])");
}

inline TailDescriptor parse_tail(const std::string& text) {
  if (text == "none") return TailDescriptor::none();
  const auto colon = text.find(':');
  if (colon != std::string::npos) {
    const std::string kind = text.substr(0, colon);
    const Scalar s = detail::parse_scalar(text.substr(colon + 1));
    double v = 0.0;
    if (const auto* d = std::get_if<double>(&s)) v = *d;
    else if (const auto* n = std::get_if<std::int64_t>(&s)) v = static_cast<double>(*n);
    else throw FormatError("tail parameter is not a number: " + text);
    if (kind == "power") return TailDescriptor::power(v);
    if (kind == "exponential") return TailDescriptor::exponential(v);
  }
  throw FormatError("unknown tail '" + text + "' (none, power:e, exponential:rate)");
}

inline SimMode parse_sim_mode(const std::string& s) {
  if (s == "plain") return SimMode::Plain;
  if (s == "truncated") return SimMode::Truncated;
  if (s == "nonneg") return SimMode::Nonneg;
  if (s == "nonneg-truncated") return SimMode::NonnegTruncated;
  throw FormatError("unknown mode '" + s + "' (plain, truncated, nonneg, nonneg-truncated)");
}

inline SmallJumpMode parse_small_mode(const std::string& s) {
  if (s == "auto") return SmallJumpMode::Auto;
  if (s == "compensate-only") return SmallJumpMode::CompensateOnly;
  if (s == "gaussian-substitute") return SmallJumpMode::GaussianSubstitute;
  throw FormatError("unknown small-jump mode '" + s + "' (auto, compensate-only, gaussian-substitute)");
}

struct SystemDecl {
  std::string name;
  SdeSystem system;
  std::string nu0;  // measure names, empty when absent
  std::string nu1;
  std::vector<std::string> requested;
};

enum class ExperimentKind { Simulate, Couple, Converge, Scan, Cbi, Moment };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Simulate: return "simulate";
    case ExperimentKind::Couple: return "couple";
    case ExperimentKind::Converge: return "converge";
    case ExperimentKind::Scan: return "scan";
    case ExperimentKind::Cbi: return "cbi";
    case ExperimentKind::Moment: return "moment";
  }
  return "?";
}

struct ExperimentDecl {
  std::string name;
  ExperimentKind kind = ExperimentKind::Simulate;
  std::string system;
  ExperimentSpec spec;
  double x0 = 0.0;
  double x0_b = 0.0;   // couple
  double x0_sd = 0.0;  // moment
  std::vector<double> alphas;     // scan
  std::vector<double> exponents;  // scan
};

struct RunConfig {
  ConfigDoc doc;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string out = "results";
  std::string format = "both";
  std::map<std::string, LevyMeasure> measures;
  std::map<std::string, SystemDecl> systems;
  std::vector<ExperimentDecl> experiments;

  const SystemDecl& system(const std::string& name) const {
    const auto it = systems.find(name);
    if (it == systems.end()) throw ConfigError("no system named '" + name + "'");
    return it->second;
  }
  const LevyMeasure* measure(const std::string& name) const {
    if (name.empty()) return nullptr;
    const auto it = measures.find(name);
    return it == measures.end() ? nullptr : &it->second;
  }
  const ExperimentDecl& experiment(const std::string& name) const {
    for (const auto& e : experiments) {
      if (e.name == name) return e;
    }
    throw ConfigError("no experiment named '" + name + "'");
  }
  /// The experiment called name, or the first one of the given kind when name is empty.
  const ExperimentDecl& experiment(const std::string& name, ExperimentKind kind) const {
    if (!name.empty()) {
      const auto& e = experiment(name);
      if (e.kind != kind) throw ConfigError("experiment '" + name + "' has type " + to_string(e.kind));
      return e;
    }
    for (const auto& e : experiments) {
      if (e.kind == kind) return e;
    }
    throw ConfigError(std::string("config declares no experiment of type ") + to_string(kind));
  }
};

namespace detail {

inline LevyMeasure build_measure(const ConfigSection& s, const std::string& base_dir) {
  s.allow_only({"kind", "role", "alpha", "scale", "tempering", "location", "mass", "rate", "law", "lo", "hi", "mean",
                "file", "lower_tail", "upper_tail"});
  const std::string role_name = s.string("role", "driver");
  MeasureRole role;
  if (role_name == "driver") role = MeasureRole::CompensatedDriver;
  else if (role_name == "subordinator") role = MeasureRole::Subordinator;
  else throw ConfigError("role must be driver or subordinator", s.field("role"));
  const std::string kind = s.string("kind");
  if (kind == "stable") return LevyMeasure::stable(s.real("alpha"), s.real("scale", 1.0), role);
  if (kind == "tempered") {
    return LevyMeasure::tempered(s.real("alpha"), s.real("scale", 1.0), s.real("tempering", 1.0), role);
  }
  if (kind == "point-mass") return LevyMeasure::point_mass(s.real("location", 1.0), s.real("mass", 1.0), role);
  if (kind == "finite") {
    const std::string law = s.string("law", "uniform");
    JumpLaw jl;
    if (law == "uniform") jl = JumpLaw::uniform(s.real("lo", 0.0), s.real("hi", 1.0));
    else if (law == "exponential") jl = JumpLaw::exponential(s.real("mean", 1.0));
    else throw ConfigError("law must be uniform or exponential", s.field("law"));
    return LevyMeasure::finite_activity(s.real("rate", 1.0), jl, role);
  }
  if (kind == "tabulated") {
    std::string file = s.string("file");
    if (!file.empty() && file.front() != '/') file = base_dir + file;
    TailDescriptor lo, hi;
    try {
      lo = parse_tail(s.string("lower_tail", "none"));
      hi = parse_tail(s.string("upper_tail", "none"));
    } catch (const FormatError& e) {
      throw ConfigError(e.what(), s.field("lower_tail/upper_tail"));
    }
    return LevyMeasure(read_tabulated_file(file, lo, hi), role);
  }
  throw ConfigError("kind must be stable, tempered, point-mass, finite or tabulated", s.field("kind"));
}

/// Piecewise-linear function through (knots, values), extended linearly past the ends.
inline ScalarFn piecewise_linear(const ConfigSection& s, const std::string& stem) {
  const std::string kk = stem + "_knots", vk = stem + "_values";
  if (!s.has(kk) && !s.has(vk)) return {};
  auto knots = s.reals(kk);
  auto values = s.reals(vk);
  if (knots.size() < 2 || knots.size() != values.size()) {
    throw ConfigError("needs at least two knots and one value per knot", s.field(kk));
  }
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (!(knots[i] > knots[i - 1])) throw ConfigError("knots must be strictly increasing", s.field(kk));
  }
  return [knots, values](double x) {
    std::size_t i = static_cast<std::size_t>(std::upper_bound(knots.begin(), knots.end(), x) - knots.begin());
    i = std::clamp<std::size_t>(i, 1, knots.size() - 1);
    const double w = (x - knots[i - 1]) / (knots[i] - knots[i - 1]);
    return values[i - 1] + w * (values[i] - values[i - 1]);
  };
}

inline SdeSystem build_system(const ConfigSection& s, bool has_nu1) {
  const std::string fam = s.string("family");
  auto p = [&](const char* k, double d) { return s.real(k, d); };
  SdeSystem sys;
  std::vector<std::string> keys{"family", "nu0", "nu1", "requested", "K", "K_linear", "K_nonneg", "p", "rho", "r_modulus"};
  auto allow = [&](std::initializer_list<const char*> extra) {
    for (const char* k : extra) keys.emplace_back(k);
    s.allow_only(keys);
  };
  if (fam == "zero") {
    allow({});
    sys = systems::zero();
  } else if (fam == "linear") {
    allow({"sigma", "beta", "sigma0", "b"});
    sys = systems::linear(p("sigma", 0.0), p("beta", 0.0), p("sigma0", 0.0), p("b", 0.0));
  } else if (fam == "brownian") {
    allow({"sigma"});
    sys = systems::brownian(p("sigma", 1.0));
  } else if (fam == "additive") {
    allow({"h0"});
    sys = systems::additive(p("h0", 1.0));
  } else if (fam == "cbi") {
    allow({"a", "b", "beta", "c", "r", "q", "immigration"});
    const CbiParams cp{p("a", 1.0), p("b", 0.0), p("beta", 0.0), p("c", 1.0), p("r", 2.0), p("q", 1.5)};
    sys = systems::cbi(cp, s.boolean("immigration", has_nu1));
  } else if (fam == "power-jump") {
    allow({"p_exp", "a", "r", "beta", "b"});
    sys = systems::power_jump(s.real("p_exp"), p("a", 1.0), p("r", 2.0), p("beta", 0.0), p("b", 0.0));
  } else if (fam == "pure-stable") {
    allow({"p_exp"});
    sys = systems::pure_stable(s.real("p_exp"));
  } else if (fam == "power-diffusion") {
    allow({"s", "gamma", "beta", "b"});
    const double sc = p("s", 1.0), g = p("gamma", 0.5), beta = p("beta", 0.0), b = p("b", 0.0);
    if (!(g > 0.0 && g <= 1.0)) throw ConfigError("gamma must lie in (0, 1]", s.field("gamma"));
    sys.family = "power-diffusion";
    sys.params = {{"s", sc}, {"gamma", g}, {"beta", beta}, {"b", b}};
    sys.sigma = [sc, g](double x) { return sc * std::pow(std::abs(x), g); };
    sys.b1 = [beta, b](double x) { return beta * x + b; };
    // |x|^(2g) <= 1 + x^2 and (beta x + b)^2 <= 2 max(beta^2, b^2)(1 + x^2)
    sys.reg.K = sc * sc + (b == 0.0 ? beta * beta : 2.0 * std::max(beta * beta, b * b));
    sys.reg.K_linear = std::abs(sc) + std::max(std::abs(beta), std::abs(b));
    sys.reg.K_nonneg = std::max(beta, 0.0) + b;
    sys.reg.rho = Modulus::power(g, std::abs(sc) > 0.0 ? std::abs(sc) : 1.0);
    sys.reg.r = Modulus::linear(std::abs(beta));
    sys.reg.nonneg_structure = true;
  } else if (fam == "custom-tabulated") {
    allow({"sigma_knots", "sigma_values", "drift_knots", "drift_values", "h0_knots", "h0_values", "h1_knots",
           "h1_values"});
    sys.family = "custom-tabulated";
    sys.sigma = piecewise_linear(s, "sigma");
    sys.b1 = piecewise_linear(s, "drift");
    sys.h0 = piecewise_linear(s, "h0");
    sys.h1 = piecewise_linear(s, "h1");
  } else {
    throw ConfigError(
        "family must be zero, linear, brownian, additive, cbi, power-jump, pure-stable, power-diffusion or "
        "custom-tabulated",
        s.field("family"));
  }
  sys.name = s.name.substr(s.name.find('.') + 1);
  if (s.has("K")) sys.reg.K = s.real("K");
  if (s.has("K_linear")) sys.reg.K_linear = s.real("K_linear");
  if (s.has("K_nonneg")) sys.reg.K_nonneg = s.real("K_nonneg");
  if (s.has("p")) sys.reg.p = s.real("p");
  try {
    if (s.has("rho")) sys.reg.rho = parse_modulus(s.string("rho"));
    if (s.has("r_modulus")) sys.reg.r = parse_modulus(s.string("r_modulus"));
  } catch (const FormatError& e) {
    throw ConfigError(e.what(), s.field(s.has("rho") ? "rho" : "r_modulus"));
  }
  try {
    sys.spot_check();
  } catch (const SpecError& e) {
    throw ConfigError(e.what(), s.field("family"));
  }
  return sys;
}

inline ExperimentKind parse_kind(const ConfigSection& s) {
  const std::string t = s.string("type");
  for (auto k : {ExperimentKind::Simulate, ExperimentKind::Couple, ExperimentKind::Converge, ExperimentKind::Scan,
                 ExperimentKind::Cbi, ExperimentKind::Moment}) {
    if (t == to_string(k)) return k;
  }
  throw ConfigError("type must be simulate, couple, converge, scan, cbi or moment", s.field("type"));
}

}  // namespace detail

/// Resolves a parsed document into measures, systems and experiments.
/// seed_override replaces [run] seed; one of the two must be present.
inline RunConfig resolve_config(const ConfigDoc& doc, std::optional<std::uint64_t> seed_override = {},
                                const std::string& base_dir = {}) {
  RunConfig rc;
  rc.doc = doc;
  for (const auto& s : doc.sections) {
    const auto dot = s.name.find('.');
    const std::string kind = s.name.substr(0, dot);
    if (s.name == "run") continue;
    if (dot == std::string::npos || dot + 1 == s.name.size() ||
        (kind != "measure" && kind != "system" && kind != "experiment")) {
      throw ConfigError("unknown section (expected run, measure.NAME, system.NAME or experiment.NAME)", "[" + s.name + "]");
    }
  }
  const ConfigSection* run = doc.find("run");
  if (run) run->allow_only({"seed", "threads", "out", "format"});
  if (seed_override) {
    rc.seed = *seed_override;
  } else {
    if (!run || !run->has("seed")) throw ConfigError("masterSeed is mandatory (set seed or pass --seed)", "[run].seed");
    const std::int64_t sd = run->integer("seed");
    if (sd < 0) throw ConfigError("must be non-negative", "[run].seed");
    rc.seed = static_cast<std::uint64_t>(sd);
  }
  if (run) {
    const std::int64_t th = run->integer("threads", 1);
    if (th < 1 || th > 1024) throw ConfigError("must lie in [1, 1024]", "[run].threads");
    rc.threads = static_cast<unsigned>(th);
    rc.out = run->string("out", rc.out);
    rc.format = run->string("format", rc.format);
    if (rc.format != "json" && rc.format != "csv" && rc.format != "both") {
      throw ConfigError("must be json, csv or both", "[run].format");
    }
  }

  auto wrap = [](const ConfigSection& s, auto&& fn) {
    try {
      return fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(e.what(), "[" + s.name + "]");
    }
  };

  for (const auto* s : doc.with_prefix("measure")) {
    const std::string name = s->name.substr(8);
    rc.measures.emplace(name, wrap(*s, [&] { return detail::build_measure(*s, base_dir); }));
  }
  for (const auto* s : doc.with_prefix("system")) {
    SystemDecl d;
    d.name = s->name.substr(7);
    d.nu0 = s->string("nu0", "");
    d.nu1 = s->string("nu1", "");
    for (const auto* ref : {&d.nu0, &d.nu1}) {
      if (!ref->empty() && !rc.measures.count(*ref)) {
        throw ConfigError("no measure named '" + *ref + "'", s->field(ref == &d.nu0 ? "nu0" : "nu1"));
      }
    }
    if (!d.nu0.empty() && rc.measures.at(d.nu0).role() != MeasureRole::CompensatedDriver) {
      throw ConfigError("nu0 must reference a driver measure", s->field("nu0"));
    }
    if (!d.nu1.empty() && rc.measures.at(d.nu1).role() != MeasureRole::Subordinator) {
      throw ConfigError("nu1 must reference a subordinator measure", s->field("nu1"));
    }
    if (s->has("requested")) d.requested = s->strings("requested");
    d.system = wrap(*s, [&] { return detail::build_system(*s, !d.nu1.empty()); });
    rc.systems.emplace(d.name, std::move(d));
  }
  for (const auto* s : doc.with_prefix("experiment")) {
    s->allow_only({"type", "system", "x0", "x0_b", "x0_sd", "base_cells", "levels", "paths", "horizon", "epsilon",
                   "epsilon1", "small_mode", "brownian", "mode", "m", "first_stream", "alphas", "exponents"});
    ExperimentDecl e;
    e.name = s->name.substr(11);
    e.kind = detail::parse_kind(*s);
    e.system = s->string("system");
    if (!rc.systems.count(e.system)) throw ConfigError("no system named '" + e.system + "'", s->field("system"));
    const SystemDecl& sd = rc.systems.at(e.system);
    ExperimentSpec& sp = e.spec;
    sp.system = sd.system;
    sp.base_cells = s->count("base_cells", 64);
    sp.levels = static_cast<int>(s->integer("levels", 4));
    sp.paths = s->count("paths", e.kind == ExperimentKind::Simulate ? 1 : 1000);
    sp.first_stream = s->count("first_stream", 0);
    sp.threads = rc.threads;
    sp.noise.horizon = s->real("horizon", 1.0);
    sp.noise.has_brownian = s->boolean("brownian", static_cast<bool>(sd.system.sigma));
    if (!sd.nu0.empty()) sp.noise.nu0 = rc.measures.at(sd.nu0);
    if (!sd.nu1.empty()) sp.noise.nu1 = rc.measures.at(sd.nu1);
    sp.noise.epsilon = s->real("epsilon", 0.0);
    sp.noise.epsilon1 = s->real("epsilon1", 0.0);
    sp.noise.master_seed = rc.seed;
    try {
      sp.noise.small_mode = parse_small_mode(s->string("small_mode", "auto"));
      sp.sim.mode = parse_sim_mode(s->string("mode", "plain"));
    } catch (const FormatError& ex) {
      throw ConfigError(ex.what(), "[" + s->name + "]");
    }
    if (s->has("m")) sp.sim.m = s->real("m");
    e.x0 = s->real("x0", 0.0);
    e.x0_b = s->real("x0_b", e.x0);
    e.x0_sd = s->real("x0_sd", 0.0);
    if (e.x0_sd < 0.0) throw ConfigError("must be non-negative", s->field("x0_sd"));
    if (e.kind == ExperimentKind::Scan) {
      e.alphas = s->reals("alphas");
      e.exponents = s->reals("exponents");
    }
    if (e.kind == ExperimentKind::Cbi) {
      if (!sd.system.cbi) throw ConfigError("cbi experiments need a system of family cbi", s->field("system"));
      const LevyMeasure* nu0 = rc.measure(sd.nu0);
      const auto* st = nu0 ? nu0->as<StablePositive>() : nullptr;
      if (!st || st->scale != 1.0) {
        throw ConfigError("cbi experiments need nu0 = a stable measure with scale 1", s->field("system"));
      }
    }
    if (e.kind == ExperimentKind::Scan && sd.system.family != "cbi" && sd.system.family != "power-jump") {
      throw ConfigError("scan needs a cbi or power-jump system as template", s->field("system"));
    }
    if (e.kind != ExperimentKind::Simulate) {
      wrap(*s, [&] {
        sp.validate(e.kind == ExperimentKind::Converge || e.kind == ExperimentKind::Scan);
        return 0;
      });
    }
    rc.experiments.push_back(std::move(e));
  }
  return rc;
}

/// Directory part of a path, with trailing slash, or empty.
inline std::string parent_dir(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return slash == std::string::npos ? std::string{} : path.substr(0, slash + 1);
}

inline RunConfig load_run_config(const std::string& path, std::optional<std::uint64_t> seed_override = {}) {
  return resolve_config(load_config(path), seed_override, parent_dir(path));
}

/// Template for phase scans, taken from a cbi or power-jump system.
inline PowerTemplate power_template(const SdeSystem& sys) {
  auto get = [&](const char* k, double d) {
    const auto it = sys.params.find(k);
    return it == sys.params.end() ? d : it->second;
  };
  return PowerTemplate{get("a", 1.0), get("r", 2.0), get("beta", 0.0), get("b", 0.0)};
}

}  // namespace jsde
