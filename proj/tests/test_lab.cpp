#include <catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "jsde/lab.hpp"
#include "jsde/run_config.hpp"

using namespace jsde;
using Catch::Approx;

namespace {

nlohmann::json pilot() {
  std::ifstream in(std::string(JSDE_FIXTURES) + "/pilot.json");
  REQUIRE(in);
  return nlohmann::json::parse(in);
}

ExperimentSpec cbi_spec(std::uint64_t seed, std::size_t paths, std::size_t cells) {
  ExperimentSpec s;
  s.system = systems::cbi(CbiParams{1.0, 0.1, -0.5, 1.0, 2.0, 1.5}, false);
  s.noise.nu0 = LevyMeasure::stable(1.5);
  s.noise.master_seed = seed;
  s.paths = paths;
  s.base_cells = cells;
  s.sim.mode = SimMode::Nonneg;
  return s;
}

}  // namespace

TEST_CASE("summary statistics", "[lab]") {
  const auto ms = mean_se({1.0, 2.0, 3.0});
  CHECK(ms.mean == 2.0);
  CHECK(ms.se == Approx(1.0 / std::sqrt(3.0)));
  CHECK(quantile({5.0, 1.0, 4.0, 2.0, 3.0}, 0.5) == 3.0);
  CHECK(quantile({5.0, 1.0, 4.0, 2.0, 3.0}, 1.0) == 5.0);
  CHECK(quantile({5.0, 1.0, 4.0, 2.0, 3.0}, 0.0) == 1.0);
  CHECK(std::isnan(quantile({}, 0.5)));
}

TEST_CASE("experiment validation", "[lab]") {
  auto s = cbi_spec(1, 99, 16);
  CHECK_THROWS_AS(couple(s, 1.0, 1.0), SpecError);
  s.paths = 100;
  s.levels = 1;
  CHECK_NOTHROW(s.validate(false));
  CHECK_THROWS_AS(cauchy_refinement_study(s, 1.0), SpecError);
}

TEST_CASE("equal initial values couple to an identically zero difference", "[lab]") {
  for (const auto& spec : {cbi_spec(11, 200, 64), [] {
         ExperimentSpec s;
         s.system = systems::linear(1.0, -1.0);
         s.noise.master_seed = 12;
         s.paths = 200;
         return s;
       }()}) {
    const auto r = couple(spec, 1.0, 1.0);
    REQUIRE(!r.mean_abs_diff.empty());
    for (double d : r.mean_abs_diff) CHECK(d == 0.0);
    for (double q : r.sup_quantiles) CHECK(q == 0.0);
    CHECK(r.times.front() == 0.0);
    CHECK(r.times.back() == 1.0);
  }
}

TEST_CASE("legs on different noise are refused", "[lab]") {
  const auto spec = cbi_spec(13, 100, 32);
  const auto model = NoiseModel::build(spec.noise, 32);
  const auto a = sample_noise(model, 32, 0);
  CHECK_THROWS_AS(couple_pair(spec.system, 1.0, 1.0, a, sample_noise(model, 32, 1)), NoiseSharingError);
  auto other_spec = spec.noise;
  other_spec.master_seed = 14;
  const auto other = NoiseModel::build(other_spec, 32);
  CHECK_THROWS_AS(couple_pair(spec.system, 1.0, 1.0, a, sample_noise(other, 32, 0)), NoiseSharingError);
  CHECK_THROWS_AS(couple_pair(spec.system, 1.0, 1.0, a, refine(a, uniform_grid(1.0, 64))), NoiseSharingError);
  CHECK_NOTHROW(couple_pair(spec.system, 1.0, 1.0, a, a));
}

TEST_CASE("Lipschitz coupling stays within the pilot constant", "[lab]") {
  const auto p = pilot()["lipschitz_coupling"];
  const double C = p["C"], C_se = p["C_se"], delta = p["delta"];
  const std::size_t cells = p["cells"];
  // the Euler map is linear, so E|diff(1)| / delta = E prod(1 - dt + dB) = (1 - dt)^n
  // (the factors are negative with probability below 1e-50)
  const double euler = std::pow(1.0 - 1.0 / static_cast<double>(cells), static_cast<double>(cells));
  CHECK(std::abs(C - euler) <= 3.0 * C_se);

  ExperimentSpec s;
  s.system = systems::linear(1.0, -1.0);
  s.noise.master_seed = 404;
  s.base_cells = cells;
  s.paths = 2000;
  const auto r = couple(s, 1.0, 1.0 + delta);
  const double se = std::hypot(r.se_abs_diff.back(), C_se * delta);
  CHECK(r.mean_abs_diff.back() <= C * delta + 3.0 * se);
  CHECK(r.mean_abs_diff.back() >= C * delta - 3.0 * se);
  CHECK(r.mean_abs_diff.front() == Approx(delta).epsilon(1e-12));
  CHECK(r.notes.front().find("no uniqueness claim") != std::string::npos);
}

TEST_CASE("an absorbed branching leg reproduces the other leg", "[lab]") {
  auto s = cbi_spec(15, 100, 64);
  s.system = systems::cbi(CbiParams{1.0, 0.0, -0.5, 1.0, 2.0, 1.5}, false);
  const auto r = couple(s, 0.0, 1.0);
  const auto model = NoiseModel::build(s.noise, s.base_cells);
  SimOptions opt = s.sim;
  opt.record = Record::Grid;
  std::vector<double> terminal;
  for (std::size_t i = 0; i < s.paths; ++i) {
    const auto noise = sample_noise(model, s.base_cells, i);
    const auto zero = simulate(s.system, 0.0, noise, opt);
    for (double x : zero.states) REQUIRE(x == 0.0);
    terminal.push_back(simulate(s.system, 1.0, noise, opt).terminal);
  }
  CHECK(r.mean_abs_diff.back() == mean_se(terminal).mean);
}

TEST_CASE("additive noise refines without error", "[lab]") {
  ExperimentSpec s;
  s.system = systems::additive(1.0);
  s.noise.nu0 = LevyMeasure::stable(1.5);
  s.noise.has_brownian = false;
  s.noise.master_seed = 16;
  s.base_cells = 32;
  s.levels = 4;
  s.paths = 200;
  const auto r = cauchy_refinement_study(s, 0.5);
  REQUIRE(r.cauchy.size() == 3);
  // exact up to the rounding of sums taken over different step counts
  for (double d : r.cauchy) CHECK(d <= 1e-12);
}

TEST_CASE("Euler order on the linear equation", "[lab]") {
  ExperimentSpec s;
  s.system = systems::linear(1.0, -1.0);
  s.noise.master_seed = 17;
  s.base_cells = 16;
  s.levels = 5;
  s.paths = 2000;
  const auto r = cauchy_refinement_study(s, 1.0);
  CHECK(r.strictly_decreasing());
  CHECK(r.converging());
  CHECK(r.estimated_order() == Approx(0.5).margin(0.2));
  CHECK(pilot()["linear_order"]["estimated_order"].get<double>() == Approx(0.5).margin(0.2));
}

TEST_CASE("branching ladder regression", "[lab]") {
  const RunConfig rc = load_run_config(std::string(JSDE_CONFIGS) + "/cbi-example.cfg");
  const auto& e = rc.experiment("converge", ExperimentKind::Converge);
  const auto r = cauchy_refinement_study(e.spec, e.x0);
  const auto p = pilot()["cbi_converge"];
  REQUIRE(r.cauchy.size() == 3);
  for (std::size_t l = 0; l < 3; ++l) CHECK(r.cauchy[l] == p["cauchy"][l].get<double>());
  CHECK(r.strictly_decreasing());
  CHECK(r.converging());
  for (std::size_t l = 1; l < r.clamp_per_step.size(); ++l) CHECK(r.clamp_per_step[l] < r.clamp_per_step[l - 1]);
  const auto j = r.to_json();
  CHECK(j["level_cells"] == std::vector<std::size_t>{1000, 2000, 4000, 8000});
  CHECK(j["converging"] == true);
}

TEST_CASE("phase scan", "[lab]") {
  SECTION("a cell above the frontier converges") {
    const auto p = pilot()["phase_cell"];
    ExperimentSpec s;
    s.noise.master_seed = p["seed"];
    s.base_cells = p["cells"];
    s.levels = 4;
    s.paths = 1000;
    s.sim.mode = SimMode::Nonneg;
    const auto scan = phase_scan({1.5}, {0.5}, PowerTemplate{1.0, 2.0, -0.5, 0.1}, s, 1.0);
    const auto& c = scan.at(0, 0);
    CHECK(c.above);
    CHECK(c.frontier == Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(c.study.converging());
    CHECK(c.study.decay_factor() == p["decay_factor"].get<double>());
  }
  SECTION("layout and frontier overlay") {
    ExperimentSpec s;
    s.noise.master_seed = 18;
    s.base_cells = 16;
    s.levels = 2;
    s.paths = 100;
    s.sim.mode = SimMode::Nonneg;
    const auto scan = phase_scan({1.25, 1.5, 1.99}, {0.2, 0.6}, PowerTemplate{}, s, 1.0);
    REQUIRE(scan.cells.size() == 6);
    CHECK(scan.at(1, 0).p == 0.6);
    CHECK(scan.at(1, 0).alpha == 1.25);
    CHECK(std::abs(scan.at(0, 0).frontier - 0.2) <= 1e-12);
    // the test is exact in the stored doubles, and double(0.2) is just above 1/5
    CHECK(scan.at(0, 0).above);
    CHECK(std::fma(0.2, 1.25, -0.25) > 0.0);
    CHECK(scan.at(1, 0).above);
    CHECK(std::abs(scan.at(0, 2).frontier - 0.5) < 0.01);
    std::ostringstream m, f;
    scan.write_matrix_csv(m);
    scan.write_frontier_csv(f);
    CHECK(m.str().rfind("p,alpha=1.25,alpha=1.5,alpha=1.99\n", 0) == 0);
    CHECK(f.str().rfind("alpha,frontier\n1.25,0.19999999999999996\n", 0) == 0);
    const auto j = scan.to_json();
    CHECK(j["cells"].size() == 6);
    CHECK(j["notes"][0].get<std::string>().find("descriptive") == 0);
  }
  SECTION("grids out of range") {
    ExperimentSpec s;
    s.paths = 100;
    CHECK_THROWS_AS(phase_scan({2.0}, {0.5}, PowerTemplate{}, s, 1.0), DomainError);
    CHECK_THROWS_AS(phase_scan({1.5}, {1.5}, PowerTemplate{}, s, 1.0), DomainError);
  }
}

TEST_CASE("branching process experiments", "[lab]") {
  SECTION("critical Feller diffusion keeps the mean") {
    // the stable part has infinite variance, so the mean check uses the diffusion alone
    ExperimentSpec s;
    s.noise.master_seed = 19;
    s.base_cells = 100;
    s.paths = 4000;
    const auto rep = cbi_experiment(CbiParams{1.0, 0.0, 0.0, 0.0, 2.0, 1.5}, 1.5, 1.0, s);
    CHECK(rep.corollary.verdict == Verdict::Verified);
    REQUIRE(rep.mean_checked);
    CHECK(std::abs(rep.mean.back() - 1.0) <= 3.0 * rep.mean_se.back());
    CHECK(rep.min_state >= 0.0);
  }
  SECTION("noise off follows the ODE") {
    ExperimentSpec s;
    s.noise.master_seed = 20;
    s.noise.has_brownian = false;
    s.base_cells = 1000;
    s.paths = 100;
    const auto rep = cbi_experiment(CbiParams{0.0, 0.4, 0.7, 0.0, 2.0, 1.5}, 1.5, 1.2, s);
    const double exact = (1.2 + 0.4 / 0.7) * std::exp(0.7) - 0.4 / 0.7;
    CHECK(rep.ode_mean.back() == Approx(exact).epsilon(1e-14));
    CHECK(rep.mean.back() == Approx(exact).epsilon(2e-3));
    // jump times still split cells, so paths differ only by discretization
    CHECK(rep.mean_se.back() <= 1e-5);
    CHECK(rep.extinct == 0.0);
  }
  SECTION("immigration by a subordinator shifts the mean ODE") {
    ExperimentSpec s;
    s.noise.master_seed = 21;
    s.noise.nu1 = LevyMeasure::point_mass(1.0, 2.0, MeasureRole::Subordinator);
    s.base_cells = 200;
    s.paths = 4000;
    const auto rep = cbi_experiment(CbiParams{1.0, 0.1, -0.5, 1.0, 2.0, 1.5}, 1.5, 1.0, s);
    CHECK(rep.subordinator_rate == Approx(2.0));
    CHECK(rep.ode_mean.back() == Approx(linear_ode(1.0, -0.5, 2.1, 1.0)));
    CHECK(std::abs(rep.mean.back() - rep.ode_mean.back()) <= 3.0 * rep.mean_se.back());
  }
  SECTION("infinite subordinator mean drops the check") {
    std::vector<double> k, d;
    for (int i = 0; i <= 20; ++i) {
      k.push_back(std::pow(10.0, -1.0 + 0.1 * i));
      d.push_back(std::pow(k.back(), -1.5));
    }
    ExperimentSpec s;
    s.noise.master_seed = 22;
    s.noise.nu1 = LevyMeasure(Tabulated{k, d, TailDescriptor::none(), TailDescriptor::power(-1.5)},
                              MeasureRole::Subordinator);
    s.base_cells = 20;
    s.paths = 100;
    const auto rep = cbi_experiment(CbiParams{}, 1.5, 1.0, s);
    CHECK_FALSE(rep.mean_checked);
    CHECK(rep.ode_mean.empty());
    CHECK(rep.to_json().contains("ode_mean") == false);
  }
  SECTION("violated corollary still simulates, with a warning") {
    ExperimentSpec s;
    s.noise.master_seed = 23;
    s.base_cells = 50;
    s.paths = 100;
    const auto rep = cbi_experiment(CbiParams{1.0, 0.1, -0.5, 1.0, 2.0, 4.0}, 1.5, 1.0, s);
    CHECK(rep.corollary.verdict == Verdict::Failed);
    CHECK(rep.notes.front().find("0.9167<1") != std::string::npos);
    CHECK(rep.min_state >= 0.0);
  }
  CHECK_THROWS_AS(cbi_experiment(CbiParams{}, 1.5, -1.0, ExperimentSpec{}), DomainError);
}

TEST_CASE("moment bound", "[lab]") {
  SECTION("zero coefficients give equality") {
    ExperimentSpec s;
    s.system = systems::zero();
    s.noise.has_brownian = false;
    s.paths = 100;
    s.base_cells = 10;
    const auto rep = moment_bound_experiment(s, InitialLaw{0.0, 0.0});
    CHECK(rep.pass());
    for (std::size_t k = 0; k < rep.times.size(); ++k) {
      CHECK(rep.empirical[k] == 1.0);
      CHECK(rep.bound[k] == 1.0);
    }
    CHECK(rep.worst_margin == 0.0);
  }
  SECTION("unit diffusion at t = 1") {
    CHECK(moment_bound(1.0, 0.0, 1.0) == Approx(std::exp(30.0)).epsilon(1e-15));
    ExperimentSpec s;
    s.system = systems::brownian(1.0);
    s.noise.master_seed = 24;
    s.paths = 500;
    s.base_cells = 100;
    const auto rep = moment_bound_experiment(s, InitialLaw{});
    CHECK(rep.K == 1.0);
    CHECK(rep.bound.back() == Approx(std::exp(30.0)));
    CHECK(rep.pass());
    CHECK(rep.worst_margin_t == 0.0);
  }
  SECTION("linear equation with a random initial value") {
    ExperimentSpec s;
    s.system = systems::linear(1.0, -1.0);
    s.noise.master_seed = 25;
    s.paths = 2000;
    s.base_cells = 200;
    const auto rep = moment_bound_experiment(s, InitialLaw{1.0, 0.5});
    CHECK(rep.pass());
    CHECK(rep.violations == 0);
    CHECK(rep.bound.front() == Approx(1.0 + 6.0 * 1.25));
    // the initial draw is part of the stream: E[1 + x0^2] = 2.25
    CHECK(std::abs(rep.empirical.front() - 2.25) <= 3.0 * rep.empirical_se.front());
  }
  SECTION("preconditions") {
    ExperimentSpec s;
    s.system = systems::linear(1.0, -1.0);
    s.system.reg.K = std::numeric_limits<double>::quiet_NaN();
    s.paths = 100;
    CHECK_THROWS_AS(moment_bound_experiment(s, InitialLaw{}), SpecError);
    // a stable driver has no second moment, so the square-growth bound fails for every K
    auto c = cbi_spec(26, 100, 10);
    c.system.reg.K = 100.0;
    CHECK_THROWS_AS(moment_bound_experiment(c, InitialLaw{1.0, 0.0}), SpecError);
  }
}

TEST_CASE("results do not depend on the thread count", "[lab]") {
  auto s = cbi_spec(27, 300, 32);
  s.levels = 3;
  const auto one = cauchy_refinement_study(s, 1.0).to_json().dump();
  const auto c1 = couple(s, 1.0, 1.5).to_json().dump();
  s.threads = 3;
  CHECK(cauchy_refinement_study(s, 1.0).to_json().dump() == one);
  CHECK(couple(s, 1.0, 1.5).to_json().dump() == c1);
}

TEST_CASE("blow-up reports the level", "[lab]") {
  ExperimentSpec s;
  s.system = systems::zero();
  s.system.b1 = [](double x) { return x * x * x; };
  s.noise.has_brownian = false;
  s.paths = 100;
  s.base_cells = 4;
  s.levels = 2;
  try {
    (void)cauchy_refinement_study(s, 1e10);
    FAIL("expected blow-up");
  } catch (const BlowUpError& e) {
    CHECK(std::string(e.what()).find("level 0 (4 cells), stream 0") == 0);
  }
}
