// Regenerates the pilot-calibrated regression constants in tests/fixtures.
// Usage: jsde_pilot <repo-root>
// Rerun only when a change to sampling or the scheme is intended to move the
// numbers, and commit the diff of tests/fixtures together with that change.

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "jsde/jsde.hpp"

using namespace jsde;
using nlohmann::json;

namespace {

void write_text(const std::string& path, const std::string& s) {
  std::ofstream os(path, std::ios::binary);
  os << s;
  if (!os) throw FormatError("cannot write " + path);
  std::cout << "wrote " << path << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: jsde_pilot <repo-root>\n";
    return 1;
  }
  const std::string root = argv[1];
  const std::string fixtures = root + "/tests/fixtures/";
  json out;
  out["format"] = 1;
  out["generated_by"] = "jsde_pilot";

  // Lipschitz coupling: sigma(x) = x, b(x) = -x, no jumps, x0 = 1 vs 1 + delta.
  // The Euler map is linear in x, so the difference is delta times a path functional.
  {
    ExperimentSpec s;
    s.system = systems::linear(1.0, -1.0);
    s.noise.master_seed = 101;
    s.base_cells = 256;
    s.paths = 100000;
    const double delta = 0.01;
    const auto r = couple(s, 1.0, 1.0 + delta);
    const double C = r.mean_abs_diff.back() / delta;
    const double se = r.se_abs_diff.back() / delta;
    out["lipschitz_coupling"] = {{"seed", 101}, {"cells", 256}, {"paths", 100000}, {"delta", delta},
                                 {"C", C},      {"C_se", se}};
    std::cout << "lipschitz coupling C = " << C << " +- " << se << "\n";
  }

  // CBI refinement ladder from the bundled example config.
  {
    const RunConfig rc = load_run_config(root + "/configs/cbi-example.cfg");
    const auto& e = rc.experiment("converge", ExperimentKind::Converge);
    const auto r = cauchy_refinement_study(e.spec, e.x0);
    std::ostringstream csv;
    r.write_csv(csv);
    write_text(fixtures + "cbi-converge.csv", csv.str());
    out["cbi_converge"] = {{"seed", rc.seed},
                           {"cauchy", r.cauchy},
                           {"cauchy_se", r.cauchy_se},
                           {"decay_factor", r.decay_factor()},
                           {"estimated_order", r.estimated_order()},
                           {"clamp_per_step", r.clamp_per_step}};
    std::cout << "cbi decay factor " << r.decay_factor() << "\n";
  }

  // One phase-scan cell above the frontier, alpha = 1.5, p = 0.5.
  {
    ExperimentSpec s;
    s.noise.master_seed = 202;
    s.base_cells = 1000;
    s.levels = 4;
    s.paths = 1000;
    s.sim.mode = SimMode::Nonneg;
    const auto scan = phase_scan({1.5}, {0.5}, PowerTemplate{1.0, 2.0, -0.5, 0.1}, s, 1.0);
    const auto& c = scan.at(0, 0);
    out["phase_cell"] = {{"seed", 202},
                         {"cells", 1000},
                         {"alpha", 1.5},
                         {"p", 0.5},
                         {"cauchy", c.study.cauchy},
                         {"decay_factor", c.study.decay_factor()},
                         {"converging", c.study.converging()}};
    std::cout << "phase cell decay " << c.study.decay_factor() << "\n";
  }

  // Euler order on sigma(x) = x.
  {
    ExperimentSpec s;
    s.system = systems::linear(1.0, -1.0);
    s.noise.master_seed = 303;
    s.base_cells = 16;
    s.levels = 5;
    s.paths = 20000;
    const auto r = cauchy_refinement_study(s, 1.0);
    out["linear_order"] = {{"seed", 303}, {"cauchy", r.cauchy}, {"estimated_order", r.estimated_order()}};
    std::cout << "linear order " << r.estimated_order() << "\n";
  }

  write_text(fixtures + "pilot.json", out.dump(2) + "\n");
  return 0;
}
