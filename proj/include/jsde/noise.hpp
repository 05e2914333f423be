#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "jsde/errors.hpp"
#include "jsde/levy_measure.hpp"
#include "jsde/quadrature.hpp"
#include "jsde/rng.hpp"

namespace jsde {

enum class SmallJumpMode { CompensateOnly, GaussianSubstitute, Auto };

inline const char* to_string(SmallJumpMode m) {
  switch (m) {
    case SmallJumpMode::CompensateOnly: return "compensate-only";
    case SmallJumpMode::GaussianSubstitute: return "gaussian-substitute";
    case SmallJumpMode::Auto: return "auto";
  }
  return "?";
}

enum class Mark : std::uint8_t { Driver0 = 0, Driver1 = 1 };

struct Jump {
  double t;
  double z;
  Mark mark;
  bool operator==(const Jump&) const = default;
};

struct NoiseSpec {
  bool has_brownian = true;
  std::optional<LevyMeasure> nu0;  // compensated driver
  std::optional<LevyMeasure> nu1;  // subordinator
  double epsilon = 0.0;            // 0: choose from the reference grid
  double epsilon1 = 0.0;           // subordinator threshold; 0 keeps every jump (finite mass only)
  SmallJumpMode small_mode = SmallJumpMode::Auto;
  double horizon = 1.0;
  std::uint64_t master_seed = 0;
};

/// Inverse-tail sampler for a measure restricted to (threshold, inf).
class JumpSizeSampler {
 public:
  static constexpr std::size_t kTableKnots = 10000;

  JumpSizeSampler(const LevyMeasure& m, double threshold) : threshold_(threshold) {
    if (const auto* s = m.as<StablePositive>()) {
      kind_ = Kind::Stable;
      alpha_ = s->alpha;
      rate_ = m.tail_mass(threshold);
    } else if (const auto* p = m.as<PointMass>()) {
      kind_ = Kind::Atom;
      atom_ = p->location;
      rate_ = m.tail_mass(threshold);
    } else if (const auto* f = m.as<FiniteActivity>()) {
      kind_ = Kind::Finite;
      law_ = f->law;
      survival_at_threshold_ = f->law.survival(threshold);
      rate_ = f->rate * survival_at_threshold_;
    } else {
      kind_ = Kind::Table;
      build_table(m);
    }
    if (!std::isfinite(rate_)) throw SpecError("large-jump rate is infinite; raise the threshold");
  }

  double rate() const noexcept { return rate_; }
  double threshold() const noexcept { return threshold_; }

  /// z with nu((z, inf)) = u * rate.
  double sample(double u) const {
    switch (kind_) {
      case Kind::Stable: return threshold_ * std::pow(u, -1.0 / alpha_);
      case Kind::Atom: return atom_;
      case Kind::Finite: return law_.inverse_survival(u * survival_at_threshold_);
      case Kind::Table: return invert_table(u);
    }
    return 0.0;
  }

 private:
  enum class Kind { Stable, Atom, Finite, Table };

  void build_table(const LevyMeasure& m) {
    measure_ = std::make_shared<LevyMeasure>(m);
    double lo = threshold_;
    if (!(lo > 0.0)) {
      // no threshold: start where the remaining mass below is negligible
      if (!m.finite_total_mass()) throw SpecError("zero threshold needs a measure with finite total mass");
      const double total = m.tail_mass(0.0);
      lo = 1.0;
      for (int i = 0; i < 2000 && m.tail_mass(0.0) - m.tail_mass(lo) > 1e-13 * total; ++i) lo *= 0.5;
    }
    double hi = std::max(lo * 2.0, 1.0);
    const double mass = m.tail_mass(lo);
    if (!(mass > 0.0)) {
      rate_ = 0.0;
      return;
    }
    while (m.tail_mass(hi) > 1e-13 * mass && hi < 1e300) hi *= 4.0;
    const double slo = std::log(lo), shi = std::log(hi);
    log_z_.resize(kTableKnots);
    tail_.resize(kTableKnots);
    for (std::size_t i = 0; i < kTableKnots; ++i) {
      log_z_[i] = slo + (shi - slo) * static_cast<double>(i) / static_cast<double>(kTableKnots - 1);
    }
    log_z_.back() = shi;
    tail_.back() = m.tail_mass(hi);
    for (std::size_t i = kTableKnots - 1; i-- > 0;) {
      tail_[i] = tail_[i + 1] + segment_mass(log_z_[i], log_z_[i + 1]);
    }
    rate_ = tail_.front();
  }

  double segment_mass(double s0, double s1) const {
    auto f = [this](double s) {
      const double z = std::exp(s);
      return measure_->density(z) * z;
    };
    return quad::gauss10(f, s0, s1);
  }

  double invert_table(double u) const {
    const double target = u * rate_;
    if (target <= tail_.back()) return std::exp(log_z_.back());
    // tail_ is non-increasing; find i with tail_[i] >= target > tail_[i+1]
    auto it = std::partition_point(tail_.begin(), tail_.end(), [target](double v) { return v >= target; });
    std::size_t i = static_cast<std::size_t>(it - tail_.begin());
    i = i == 0 ? 0 : i - 1;
    i = std::min(i, kTableKnots - 2);
    const double top = log_z_[i + 1];
    double a = log_z_[i], b = top;
    // mass of (e^s, e^top] must equal target - tail_[i+1]; [a, b] brackets s
    const double want = target - tail_[i + 1];
    double s = a + (b - a) * (1.0 - want / std::max(tail_[i] - tail_[i + 1], 1e-300));
    for (int it2 = 0; it2 < 60; ++it2) {
      const double g = segment_mass(s, top) - want;
      if (std::abs(g) <= 1e-12 * rate_) break;
      if (g > 0.0) a = s; else b = s;  // too much mass above s: move s up
      const double z = std::exp(s);
      const double deriv = -measure_->density(z) * z;
      double next = deriv != 0.0 ? s - g / deriv : 0.5 * (a + b);
      if (!(next > a && next < b)) next = 0.5 * (a + b);
      s = next;
    }
    return std::exp(s);
  }

  Kind kind_ = Kind::Stable;
  double threshold_ = 0.0;
  double rate_ = 0.0;
  double alpha_ = 1.5;
  double atom_ = 1.0;
  JumpLaw law_;
  double survival_at_threshold_ = 1.0;
  std::shared_ptr<const LevyMeasure> measure_;
  std::vector<double> log_z_;
  std::vector<double> tail_;
};

/// Threshold with T * nu((eps, inf)) close to min(10 sqrt(cells), 1e6).
inline double default_epsilon(const LevyMeasure& nu0, double horizon, std::size_t cells) {
  const double target = std::min(10.0 * std::sqrt(static_cast<double>(cells)), 1e6);
  double lo = 1e-12, hi = 1e6;
  if (horizon * nu0.tail_mass(lo) <= target) return lo;
  if (horizon * nu0.tail_mass(hi) >= target) return hi;
  for (int i = 0; i < 200; ++i) {
    const double mid = std::sqrt(lo * hi);
    if (horizon * nu0.tail_mass(mid) > target) lo = mid; else hi = mid;
    if (hi / lo < 1.0 + 1e-12) break;
  }
  return hi;
}

/// A NoiseSpec with every derived quantity resolved.
struct NoiseModel {
  NoiseSpec spec;
  double epsilon = 0.0;
  double epsilon1 = 0.0;
  SmallJumpMode mode = SmallJumpMode::CompensateOnly;
  double rate0 = 0.0;
  double rate1 = 0.0;
  double small_variance0 = 0.0;  // H0(eps)
  double large_mean0 = 0.0;      // G0(eps)
  double small_mean1 = 0.0;      // integral of z over (0, eps1] against nu1
  std::optional<JumpSizeSampler> sizes0;
  std::optional<JumpSizeSampler> sizes1;

  static std::shared_ptr<const NoiseModel> build(const NoiseSpec& spec, std::size_t reference_cells) {
    if (!(spec.horizon > 0.0) || !std::isfinite(spec.horizon)) throw SpecError("noise horizon must be positive");
    auto m = std::make_shared<NoiseModel>();
    m->spec = spec;
    if (spec.nu0) {
      if (spec.nu0->role() != MeasureRole::CompensatedDriver) throw SpecError("nu0 must have the driver role");
      m->epsilon = spec.epsilon > 0.0 ? spec.epsilon : default_epsilon(*spec.nu0, spec.horizon, reference_cells);
      m->sizes0.emplace(*spec.nu0, m->epsilon);
      m->rate0 = m->sizes0->rate();
      m->small_variance0 = spec.nu0->truncated_second_moment(m->epsilon);
      m->large_mean0 = spec.nu0->tail_first_moment(m->epsilon);
      m->mode = spec.small_mode;
      if (m->mode == SmallJumpMode::Auto) {
        const double ratio = m->small_variance0 / (m->epsilon * m->epsilon);
        m->mode = ratio > 10.0 ? SmallJumpMode::GaussianSubstitute : SmallJumpMode::CompensateOnly;
      }
    } else if (spec.small_mode == SmallJumpMode::GaussianSubstitute) {
      m->mode = SmallJumpMode::CompensateOnly;
    }
    if (spec.nu1) {
      if (spec.nu1->role() != MeasureRole::Subordinator) throw SpecError("nu1 must have the subordinator role");
      if (spec.epsilon1 < 0.0) throw SpecError("subordinator threshold must be non-negative");
      if (spec.epsilon1 == 0.0 && !spec.nu1->finite_total_mass()) {
        throw SpecError("subordinator with infinite total mass needs a positive threshold");
      }
      m->epsilon1 = spec.epsilon1;
      m->sizes1.emplace(*spec.nu1, m->epsilon1);
      m->rate1 = m->sizes1->rate();
      m->small_mean1 = m->epsilon1 > 0.0 ? spec.nu1->truncated_first_moment(m->epsilon1) : 0.0;
    }
    const double expected = spec.horizon * (m->rate0 + m->rate1);
    if (!std::isfinite(expected)) throw SpecError("infinite large-jump rate");
    if (expected > 1e8) throw SpecError("expected large-jump count above 1e8; raise epsilon");
    return m;
  }

  /// Variance scale of the small-jump aggregate per unit time.
  double small_rate_variance() const {
    return mode == SmallJumpMode::GaussianSubstitute ? small_variance0 : 0.0;
  }
};

struct Provenance {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_index = 0;
  std::uint64_t cells = 0;
  bool operator==(const Provenance&) const = default;
};

/// One realization of the driving noise on a grid.
struct NoisePath {
  std::vector<double> grid;
  std::vector<double> brownian;
  std::vector<double> small;
  std::vector<Jump> jumps;
  Provenance provenance;
  std::shared_ptr<const NoiseModel> model;

  std::size_t cells() const noexcept { return grid.empty() ? 0 : grid.size() - 1; }
  double horizon() const noexcept { return grid.empty() ? 0.0 : grid.back(); }
};

/// t_i = T * i / n; dyadic refinements of such grids nest bit-exactly.
inline std::vector<double> uniform_grid(double horizon, std::size_t cells) {
  if (cells == 0) throw DomainError("grid needs at least one cell");
  std::vector<double> g(cells + 1);
  for (std::size_t i = 0; i <= cells; ++i) g[i] = horizon * static_cast<double>(i) / static_cast<double>(cells);
  g.back() = horizon;
  return g;
}

inline void validate_grid(const std::vector<double>& grid, double horizon) {
  if (grid.size() < 2) throw SpecError("grid needs at least two points");
  if (grid.front() != 0.0) throw SpecError("grid must start at 0");
  if (grid.back() != horizon) throw SpecError("grid must end at the noise horizon");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw SpecError("grid must be strictly increasing");
  }
}

inline std::uint64_t time_key(double t) { return std::bit_cast<std::uint64_t>(t); }

namespace detail {

/// Gaussian increments are stored on the lattice 2^-44 Z. A parent on the
/// lattice then splits into two lattice children whose floating-point sum
/// is the parent exactly (for magnitudes below 2^9).
inline constexpr double kLattice = 0x1.0p-44;

inline double to_lattice(double x) { return std::round(x / kLattice) * kLattice; }

/// Splits total into (l, r) with l + r == total in floating point.
inline std::pair<double, double> exact_pair(double total, double l) {
  l = to_lattice(l);
  const double r = total - l;
  if (l + r == total) return {l, r};
  return {total, 0.0};
}

/// Gaussian-bridge split of an increment over [a, b] at m, with variance
/// per unit time var_rate. The draw is keyed by the bits of m.
inline std::pair<double, double> bridge_split(double total, double a, double m, double b, double var_rate,
                                              const RandomStream& rs, Purpose purpose) {
  const double w = (m - a) / (b - a);
  const double mean = total * w;
  const double var = var_rate * (m - a) * (b - m) / (b - a);
  double l = mean;
  if (var > 0.0) l += std::sqrt(var) * rs.normal(purpose, time_key(m));
  return exact_pair(total, l);
}

/// Interior index of grid(lo, hi) nearest the midpoint of [grid[lo], grid[hi]].
inline std::size_t split_index(const std::vector<double>& grid, std::size_t lo, std::size_t hi) {
  const double mid = 0.5 * (grid[lo] + grid[hi]);
  std::size_t best = lo + 1;
  double best_d = std::abs(grid[best] - mid);
  for (std::size_t j = lo + 2; j < hi; ++j) {
    const double d = std::abs(grid[j] - mid);
    if (d < best_d) {
      best = j;
      best_d = d;
    }
  }
  return best;
}

}  // namespace detail

/// Samples a noise path on the given grid from stream (seed, stream_index).
inline NoisePath sample_noise(std::shared_ptr<const NoiseModel> model, const std::vector<double>& grid,
                              std::uint64_t stream_index) {
  const NoiseSpec& spec = model->spec;
  validate_grid(grid, spec.horizon);
  const RandomStream rs(spec.master_seed, stream_index);
  NoisePath path;
  path.grid = grid;
  path.model = model;
  path.provenance = {spec.master_seed, stream_index, grid.size() - 1};
  const std::size_t n = grid.size() - 1;
  path.brownian.assign(n, 0.0);
  path.small.assign(n, 0.0);
  const double small_var = model->small_rate_variance();
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = grid[i + 1] - grid[i];
    if (spec.has_brownian) path.brownian[i] = detail::to_lattice(std::sqrt(dt) * rs.normal(Purpose::Brownian, i));
    if (small_var > 0.0) {
      path.small[i] = detail::to_lattice(std::sqrt(dt * small_var) * rs.normal(Purpose::SmallJumps, i));
    }
  }
  auto poisson = [&](const JumpSizeSampler& sizes, Purpose purpose, Mark mark) {
    if (!(sizes.rate() > 0.0)) return;
    double t = 0.0;
    for (std::uint64_t k = 0;; ++k) {
      const auto u = rs.uniform2(purpose, k);
      t += -std::log(u[0]) / sizes.rate();
      if (t > spec.horizon) break;
      path.jumps.push_back({t, sizes.sample(u[1]), mark});
    }
  };
  if (model->sizes0) poisson(*model->sizes0, Purpose::Jumps0, Mark::Driver0);
  if (model->sizes1) poisson(*model->sizes1, Purpose::Jumps1, Mark::Driver1);
  std::stable_sort(path.jumps.begin(), path.jumps.end(), [](const Jump& a, const Jump& b) {
    return a.t < b.t || (a.t == b.t && a.mark < b.mark);
  });
  return path;
}

inline NoisePath sample_noise(std::shared_ptr<const NoiseModel> model, std::size_t cells,
                              std::uint64_t stream_index) {
  return sample_noise(model, uniform_grid(model->spec.horizon, cells), stream_index);
}

/// Inserts the points of new_grid into path's grid. Brownian and small-jump
/// increments are split by keyed Gaussian bridges, always inserting the
/// point nearest the middle of the current interval first, so nested dyadic
/// refinements give identical paths however they are staged.
inline NoisePath refine(const NoisePath& path, const std::vector<double>& new_grid) {
  if (new_grid.size() < path.grid.size() || new_grid.front() != path.grid.front() ||
      new_grid.back() != path.grid.back()) {
    throw RefinementError("new grid does not span the old grid");
  }
  for (std::size_t i = 1; i < new_grid.size(); ++i) {
    if (!(new_grid[i] > new_grid[i - 1])) throw RefinementError("new grid must be strictly increasing");
  }
  const RandomStream rs(path.provenance.master_seed, path.provenance.stream_index);
  const double small_var = path.model ? path.model->small_rate_variance() : 0.0;
  const double brown_var = !path.model || path.model->spec.has_brownian ? 1.0 : 0.0;

  NoisePath out;
  out.grid = new_grid;
  out.jumps = path.jumps;
  out.model = path.model;
  out.provenance = path.provenance;
  out.provenance.cells = new_grid.size() - 1;
  out.brownian.assign(new_grid.size() - 1, 0.0);
  out.small.assign(new_grid.size() - 1, 0.0);

  // recursive bisection of [lo, hi] (indices into new_grid)
  auto split = [&](auto&& self, std::size_t lo, std::size_t hi, double inc_b, double inc_s) -> void {
    if (hi == lo + 1) {
      out.brownian[lo] = inc_b;
      out.small[lo] = inc_s;
      return;
    }
    const double a = new_grid[lo], b = new_grid[hi];
    const std::size_t best = detail::split_index(new_grid, lo, hi);
    const double m = new_grid[best];
    auto [lb, rb] = brown_var > 0.0 ? detail::bridge_split(inc_b, a, m, b, 1.0, rs, Purpose::BridgeBrownian)
                                    : std::pair{0.0, 0.0};
    auto [ls, rsm] = small_var > 0.0 ? detail::bridge_split(inc_s, a, m, b, small_var, rs, Purpose::BridgeSmall)
                                     : std::pair{0.0, 0.0};
    self(self, lo, best, lb, ls);
    self(self, best, hi, rb, rsm);
  };

  std::size_t j = 0;
  for (std::size_t i = 0; i + 1 < path.grid.size(); ++i) {
    if (new_grid[j] != path.grid[i]) throw RefinementError("new grid does not contain the old grid point");
    std::size_t k = j + 1;
    while (k < new_grid.size() && new_grid[k] < path.grid[i + 1]) ++k;
    if (k == new_grid.size() || new_grid[k] != path.grid[i + 1]) {
      throw RefinementError("new grid does not contain the old grid point");
    }
    split(split, j, k, path.brownian[i], path.small[i]);
    j = k;
  }
  return out;
}

/// Sums fine increments back onto a coarser subgrid. Each coarse cell is
/// summed along the same midpoint-first tree that refine splits along, so a
/// refined path sums back to its parent bit for bit.
inline std::vector<double> coarse_sum(const std::vector<double>& fine_grid, const std::vector<double>& inc,
                                      const std::vector<double>& coarse_grid) {
  auto tree = [&](auto&& self, std::size_t lo, std::size_t hi) -> double {
    if (hi == lo + 1) return inc[lo];
    const std::size_t m = detail::split_index(fine_grid, lo, hi);
    return self(self, lo, m) + self(self, m, hi);
  };
  std::vector<double> out(coarse_grid.size() - 1, 0.0);
  std::size_t j = 0;
  for (std::size_t c = 0; c + 1 < coarse_grid.size(); ++c) {
    while (j < fine_grid.size() && fine_grid[j] < coarse_grid[c]) ++j;
    std::size_t k = j + 1;
    while (k < fine_grid.size() && fine_grid[k] < coarse_grid[c + 1]) ++k;
    if (j >= fine_grid.size() || k >= fine_grid.size() || fine_grid[j] != coarse_grid[c] ||
        fine_grid[k] != coarse_grid[c + 1]) {
      throw RefinementError("coarse grid is not a subgrid of the fine grid");
    }
    out[c] = tree(tree, j, k);
    j = k;
  }
  return out;
}

/// One piece of the jump-adapted time stepping: the noise over (t_end - dt, t_end],
/// then optionally a jump at t_end.
struct Substep {
  double t_end;
  double dt;
  double dB;
  double dS;
  const Jump* jump;
  bool grid_point;
  std::size_t cell;
};

/// Visits the grid cells split at the large-jump epochs. Brownian and
/// small-jump increments of a cell are divided at each epoch by bridges
/// keyed by the epoch, so the visit is a pure function of the path.
template <class F>
void walk_events(const NoisePath& path, F&& visit) {
  const RandomStream rs(path.provenance.master_seed, path.provenance.stream_index);
  const double small_var = path.model ? path.model->small_rate_variance() : 0.0;
  const double brown_var = !path.model || path.model->spec.has_brownian ? 1.0 : 0.0;
  std::size_t j = 0;
  const std::size_t nj = path.jumps.size();
  for (std::size_t i = 0; i + 1 < path.grid.size(); ++i) {
    const double a = path.grid[i], b = path.grid[i + 1];
    double s = a;
    double rem_b = path.brownian[i];
    double rem_s = path.small[i];
    while (j < nj && path.jumps[j].t <= b) {
      const Jump& J = path.jumps[j++];
      const double tau = std::max(J.t, s);
      if (tau >= b) {
        visit(Substep{b, b - s, rem_b, rem_s, &J, true, i});
        rem_b = rem_s = 0.0;
        s = b;
        // later jumps at the same epoch b act on the post-jump state
        continue;
      }
      double lb = 0.0, ls = 0.0;
      if (tau > s) {
        auto pb = brown_var > 0.0 ? detail::bridge_split(rem_b, s, tau, b, 1.0, rs, Purpose::SplitBrownian)
                                  : std::pair{0.0, 0.0};
        auto ps = small_var > 0.0 ? detail::bridge_split(rem_s, s, tau, b, small_var, rs, Purpose::SplitSmall)
                                  : std::pair{0.0, 0.0};
        lb = pb.first;
        rem_b = pb.second;
        ls = ps.first;
        rem_s = ps.second;
      }
      visit(Substep{tau, tau - s, lb, ls, &J, false, i});
      s = tau;
    }
    if (s < b) visit(Substep{b, b - s, rem_b, rem_s, nullptr, true, i});
  }
}

/// One exact draw of the centered spectrally positive alpha-stable increment
/// over dt with E exp(-u X) = exp(c u^alpha dt), by the Chambers-Mallows-Stuck
/// transform for skewness 1.
inline double stable_increment(double alpha, double c, double dt, double u_angle, double u_exp) {
  if (!(alpha > 1.0 && alpha < 2.0)) throw DomainError("stable_increment: alpha must lie in (1, 2)");
  if (!(c > 0.0) || !(dt > 0.0)) throw DomainError("stable_increment: c and dt must be positive");
  const double pi = std::numbers::pi;
  const double tan_term = std::tan(pi * alpha / 2.0);
  const double B = std::atan(tan_term) / alpha;
  const double S = std::pow(1.0 + tan_term * tan_term, 1.0 / (2.0 * alpha));
  const double V = pi * (u_angle - 0.5);
  const double W = -std::log(u_exp);
  const double X = S * std::sin(alpha * (V + B)) / std::pow(std::cos(V), 1.0 / alpha) *
                   std::pow(std::cos(V - alpha * (V + B)) / W, (1.0 - alpha) / alpha);
  const double sigma = std::pow(c * dt * std::abs(std::cos(pi * alpha / 2.0)), 1.0 / alpha);
  return sigma * X;
}

inline double stable_increment(double alpha, double c, double dt, Lane& lane) {
  const double u1 = lane.uniform();
  const double u2 = lane.uniform();
  return stable_increment(alpha, c, dt, u1, u2);
}

/// The driver value L0 at each grid point implied by a path (jumps minus the
/// large-jump compensator plus the small-jump aggregate).
inline std::vector<double> driver0_on_grid(const NoisePath& path) {
  std::vector<double> L(path.grid.size(), 0.0);
  const double g = path.model ? path.model->large_mean0 : 0.0;
  std::size_t j = 0;
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < path.grid.size(); ++i) {
    const double b = path.grid[i + 1];
    acc += path.small[i] - g * (b - path.grid[i]);
    while (j < path.jumps.size() && path.jumps[j].t <= b) {
      if (path.jumps[j].mark == Mark::Driver0) acc += path.jumps[j].z;
      ++j;
    }
    L[i + 1] = acc;
  }
  return L;
}

}  // namespace jsde
