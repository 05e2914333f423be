// Command-line front end. Exit codes: 0 ok, 1 config/usage error,
// 2 a requested check failed, 3 undecidable, 4 module error.

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "jsde/jsde.hpp"
#include "jsde/manifest.hpp"

using namespace jsde;
using nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string out;
  std::string format;
  std::string experiment;
};

RunConfig load(const Globals& g) {
  if (g.config.empty()) throw ConfigError("--config is required");
  RunConfig rc = load_run_config(g.config, g.seed);
  if (g.threads) {
    rc.threads = *g.threads;
    for (auto& e : rc.experiments) e.spec.threads = rc.threads;
  }
  if (!g.format.empty()) rc.format = g.format;
  if (!g.out.empty()) rc.out = g.out;
  return rc;
}

json experiment_meta(const RunConfig& rc, const ExperimentDecl& e) {
  return {{"experiment", e.name},
          {"type", to_string(e.kind)},
          {"system", e.system},
          {"seed", rc.seed},
          {"paths", e.spec.paths},
          {"base_cells", e.spec.base_cells},
          {"levels", e.spec.levels},
          {"horizon", e.spec.noise.horizon},
          {"first_stream", e.spec.first_stream},
          {"mode", to_string(e.spec.sim.mode)}};
}

void finish(const OutputSet& out, const Globals& g, const RunConfig& rc, const std::string& cmd) {
  json meta;
  meta["tool"] = "jsde";
  meta["subcommand"] = cmd;
  meta["config"] = g.config;
  meta["config_sha256"] = sha256_hex(serialize_config(rc.doc));
  meta["seed"] = rc.seed;
  meta["threads"] = rc.threads;
  meta["format"] = rc.format;
  out.write_manifest(meta);
  std::cout << "wrote " << out.files().size() << " file(s) and manifest.json to " << out.dir().string() << "\n";
}

std::string to_csv(const std::function<void(std::ostream&)>& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

int cmd_check(const Globals& g, const std::string& system_name) {
  const RunConfig rc = load(g);
  const SystemDecl& sd = rc.system(system_name);
  CheckOptions o;
  o.seed = rc.seed;
  o.requested = sd.requested;
  const auto rep = check_hypotheses(sd.system, rc.measure(sd.nu0), rc.measure(sd.nu1), o);
  if (rc.format == "json") std::cout << rep.to_json().dump(2) << "\n";
  else std::cout << rep.render();
  if (!g.out.empty()) {
    OutputSet out(rc.out, rc.format);
    out.write_json("report.json", rep.to_json());
    finish(out, g, rc, "check");
  }
  return exit_code(rep.overall());
}

int cmd_simulate(const Globals& g) {
  const RunConfig rc = load(g);
  const auto& e = rc.experiment(g.experiment, ExperimentKind::Simulate);
  const auto model = NoiseModel::build(e.spec.noise, e.spec.base_cells);
  SimOptions opt = e.spec.sim;
  opt.record = Record::Grid;
  std::vector<SolutionPath> paths(e.spec.paths);
  parallel_for(e.spec.paths, rc.threads, [&](std::size_t i) {
    paths[i] = simulate(e.spec.system, e.x0, sample_noise(model, e.spec.base_cells, e.spec.first_stream + i), opt);
  });
  EnsembleSummary sum;
  for (const auto& p : paths) sum.add(p);
  OutputSet out(rc.out, rc.format);
  if (out.csv()) {
    if (paths.size() == 1) {
      out.write("simulate.csv", to_csv([&](std::ostream& os) { write_solution_csv(os, paths.front()); }));
    } else {
      out.write("simulate.csv", to_csv([&](std::ostream& os) {
        os.precision(17);
        os << "t";
        for (std::size_t i = 0; i < paths.size(); ++i) os << ",x_" << i;
        os << '\n';
        for (std::size_t k = 0; k < paths.front().times.size(); ++k) {
          os << paths.front().times[k];
          for (const auto& p : paths) os << ',' << p.states[k];
          os << '\n';
        }
      }));
    }
  }
  if (out.json()) {
    json j = experiment_meta(rc, e);
    j["summary"] = sum.to_json();
    out.write_json("simulate.json", j);
  }
  std::cout << "simulate " << e.name << ": " << paths.size() << " path(s), terminal mean " << sum.mean.back() << "\n";
  finish(out, g, rc, "simulate");
  return 0;
}

int cmd_couple(const Globals& g) {
  const RunConfig rc = load(g);
  const auto& e = rc.experiment(g.experiment, ExperimentKind::Couple);
  const auto r = couple(e.spec, e.x0, e.x0_b);
  OutputSet out(rc.out, rc.format);
  if (out.json()) {
    json j = experiment_meta(rc, e);
    j["x0_a"] = e.x0;
    j["x0_b"] = e.x0_b;
    j["result"] = r.to_json();
    out.write_json("couple.json", j);
  }
  if (out.csv()) out.write("couple.csv", to_csv([&](std::ostream& os) { r.write_csv(os); }));
  std::cout << "couple " << e.name << ": E|diff(T)| = " << r.mean_abs_diff.back() << " +- " << r.se_abs_diff.back()
            << "\n";
  finish(out, g, rc, "couple");
  return 0;
}

int cmd_converge(const Globals& g) {
  const RunConfig rc = load(g);
  const auto& e = rc.experiment(g.experiment, ExperimentKind::Converge);
  const auto r = cauchy_refinement_study(e.spec, e.x0);
  OutputSet out(rc.out, rc.format);
  if (out.json()) {
    json j = experiment_meta(rc, e);
    j["x0"] = e.x0;
    j["result"] = r.to_json();
    out.write_json("converge.json", j);
  }
  if (out.csv()) out.write("converge.csv", to_csv([&](std::ostream& os) { r.write_csv(os); }));
  std::cout << "converge " << e.name << "\n  cells       E|X_l - X_l+1|   se\n";
  for (std::size_t l = 0; l < r.cauchy.size(); ++l) {
    std::cout << "  " << std::setw(5) << r.level_cells[l] << "->" << std::setw(5) << r.level_cells[l + 1] << "  "
              << std::setw(12) << r.cauchy[l] << "  " << r.cauchy_se[l] << "\n";
  }
  std::cout << "  strictly decreasing: " << (r.strictly_decreasing() ? "yes" : "no")
            << ", decay factor " << r.decay_factor() << ", estimated order " << r.estimated_order() << "\n";
  finish(out, g, rc, "converge");
  return 0;
}

int cmd_scan(const Globals& g) {
  const RunConfig rc = load(g);
  const auto& e = rc.experiment(g.experiment, ExperimentKind::Scan);
  const auto scan = phase_scan(e.alphas, e.exponents, power_template(e.spec.system), e.spec, e.x0);
  OutputSet out(rc.out, rc.format);
  if (out.json()) {
    json j = experiment_meta(rc, e);
    j["x0"] = e.x0;
    j["scan"] = scan.to_json();
    out.write_json("scan.json", j);
  }
  if (out.csv()) {
    out.write("scan_matrix.csv", to_csv([&](std::ostream& os) { scan.write_matrix_csv(os); }));
    out.write("scan_frontier.csv", to_csv([&](std::ostream& os) { scan.write_frontier_csv(os); }));
  }
  std::cout << "scan " << e.name << ": " << scan.cells.size() << " cells\n";
  finish(out, g, rc, "scan");
  return 0;
}

int cmd_cbi(const Globals& g) {
  const RunConfig rc = load(g);
  const auto& e = rc.experiment(g.experiment, ExperimentKind::Cbi);
  const double alpha = rc.measure(rc.system(e.system).nu0)->as<StablePositive>()->alpha;
  const auto rep = cbi_experiment(*e.spec.system.cbi, alpha, e.x0, e.spec);
  OutputSet out(rc.out, rc.format);
  if (out.json()) {
    json j = experiment_meta(rc, e);
    j["report"] = rep.to_json();
    out.write_json("cbi.json", j);
  }
  if (out.csv()) {
    out.write("cbi_mean.csv", to_csv([&](std::ostream& os) {
      os.precision(17);
      os << "t,mean,se" << (rep.mean_checked ? ",ode_mean" : "") << '\n';
      for (std::size_t k = 0; k < rep.times.size(); ++k) {
        os << rep.times[k] << ',' << rep.mean[k] << ',' << rep.mean_se[k];
        if (rep.mean_checked) os << ',' << rep.ode_mean[k];
        os << '\n';
      }
    }));
  }
  std::cout << "cbi " << e.name << ": corollary " << to_string(rep.corollary.verdict)
            << (rep.corollary.witness.empty() ? "" : " (" + rep.corollary.witness + ")") << ", min state "
            << rep.min_state << ", extinct by T " << rep.extinct << "\n";
  for (const auto& n : rep.notes) std::cout << "  note: " << n << "\n";
  finish(out, g, rc, "cbi");
  return 0;
}

int cmd_moment(const Globals& g) {
  const RunConfig rc = load(g);
  const auto& e = rc.experiment(g.experiment, ExperimentKind::Moment);
  const auto rep = moment_bound_experiment(e.spec, InitialLaw{e.x0, e.x0_sd});
  OutputSet out(rc.out, rc.format);
  if (out.json()) {
    json j = experiment_meta(rc, e);
    j["report"] = rep.to_json();
    out.write_json("moment.json", j);
  }
  if (out.csv()) {
    out.write("moment.csv", to_csv([&](std::ostream& os) {
      os.precision(17);
      os << "t,empirical,se,bound\n";
      for (std::size_t k = 0; k < rep.times.size(); ++k) {
        os << rep.times[k] << ',' << rep.empirical[k] << ',' << rep.empirical_se[k] << ',' << rep.bound[k] << '\n';
      }
    }));
  }
  std::cout << "moment " << e.name << ": " << (rep.pass() ? "pass" : "FAIL") << ", violations " << rep.violations
            << ", worst margin " << rep.worst_margin << " at t=" << rep.worst_margin_t << "\n";
  finish(out, g, rc, "moment");
  return rep.pass() ? 0 : 2;
}

int cmd_noise(const Globals& g, std::uint64_t stream) {
  const RunConfig rc = load(g);
  if (rc.experiments.empty()) throw ConfigError("config declares no experiment");
  const auto& e = g.experiment.empty() ? rc.experiments.front() : rc.experiment(g.experiment);
  const auto model = NoiseModel::build(e.spec.noise, e.spec.base_cells);
  const auto path = sample_noise(model, e.spec.base_cells, stream);
  OutputSet out(rc.out, rc.format);
  std::ostringstream bin;
  write_noise_binary(bin, path);
  out.write("noise.lvyp", bin.str());
  if (out.csv()) {
    out.write("noise.csv", to_csv([&](std::ostream& os) { write_noise_csv(os, path); }));
    out.write("jumps.csv", to_csv([&](std::ostream& os) { write_jumps_csv(os, path); }));
  }
  if (out.json()) {
    out.write_json("noise.json", {{"experiment", e.name},
                                  {"seed", rc.seed},
                                  {"stream", stream},
                                  {"cells", path.cells()},
                                  {"jumps", path.jumps.size()},
                                  {"epsilon", model->epsilon},
                                  {"small_mode", to_string(model->mode)},
                                  {"rate0", model->rate0},
                                  {"rate1", model->rate1}});
  }
  std::cout << "noise " << e.name << " stream " << stream << ": " << path.jumps.size() << " large jumps\n";
  finish(out, g, rc, "noise");
  return 0;
}

int cmd_yw(const std::string& modulus, int levels, const std::string& out_dir) {
  std::optional<Modulus> parsed;
  try {
    parsed = parse_modulus(modulus);
  } catch (const FormatError& e) {
    throw ConfigError(e.what(), "--modulus");
  }
  const Modulus& rho = *parsed;
  const auto logs = compute_log_levels(rho, levels);
  std::cout << "levels for rho = " << rho.describe() << "\n";
  json j;
  j["modulus"] = rho.describe();
  j["log_levels"] = logs;
  for (int k = 0; k <= levels; ++k) {
    std::cout << "a_" << k << " = " << std::exp(logs[static_cast<std::size_t>(k)]) << "   (log "
              << logs[static_cast<std::size_t>(k)] << ")\n";
  }
  if (!out_dir.empty()) {
    OutputSet out(out_dir, "json");
    out.write_json("yw.json", j);
    out.write_manifest({{"tool", "jsde"}, {"subcommand", "yw"}, {"modulus", modulus}, {"levels", levels}});
  }
  return 0;
}

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const DomainError*>(&e)) return "domain";
  if (dynamic_cast<const IntegrabilityError*>(&e)) return "integrability";
  if (dynamic_cast<const QuadratureError*>(&e)) return "quadrature";
  if (dynamic_cast<const EstimationError*>(&e)) return "estimation";
  if (dynamic_cast<const SpecError*>(&e)) return "spec";
  if (dynamic_cast<const RefinementError*>(&e)) return "refinement";
  if (dynamic_cast<const BlowUpError*>(&e)) return "blow-up";
  if (dynamic_cast<const LevelExhaustionError*>(&e)) return "level-exhaustion";
  if (dynamic_cast<const NoiseSharingError*>(&e)) return "noise-sharing";
  if (dynamic_cast<const FormatError*>(&e)) return "format";
  return "internal";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jump SDE uniqueness laboratory"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::vector<CLI::Option*> seed_opts, thread_opts;
  auto add_common = [&](CLI::App* sub, bool experiment) {
    sub->add_option("--config", g.config, "run configuration file")->required();
    seed_opts.push_back(sub->add_option("--seed", seed, "master seed (overrides [run] seed)"));
    thread_opts.push_back(sub->add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 1024u)));
    sub->add_option("--out", g.out, "output directory");
    sub->add_option("--format", g.format, "json, csv or both")->check(CLI::IsMember({"json", "csv", "both"}));
    if (experiment) sub->add_option("--experiment", g.experiment, "experiment name (default: first of this type)");
  };

  std::string system_name;
  auto* check = app.add_subcommand("check", "check the hypotheses of a declared system");
  add_common(check, false);
  check->add_option("--system", system_name, "system name")->required();

  auto* sim = app.add_subcommand("simulate", "simulate sample paths");
  auto* cpl = app.add_subcommand("couple", "shared-noise coupling of two initial values");
  auto* cnv = app.add_subcommand("converge", "Cauchy refinement study");
  auto* scn = app.add_subcommand("scan", "Holder-exponent phase scan");
  auto* cbi = app.add_subcommand("cbi", "branching process with immigration");
  auto* mom = app.add_subcommand("moment", "second-moment bound check");
  for (auto* s : {sim, cpl, cnv, scn, cbi, mom}) add_common(s, true);

  std::uint64_t stream = 0;
  auto* noi = app.add_subcommand("noise", "export one noise realization (binary and CSV)");
  add_common(noi, true);
  noi->add_option("--stream", stream, "stream index");

  std::string modulus;
  int levels = 5;
  std::string yw_out;
  auto* yw = app.add_subcommand("yw", "Yamada-Watanabe levels for a modulus");
  yw->add_option("--modulus", modulus, "power:g[:scale], linear:slope or log[:scale]")->required();
  yw->add_option("--levels", levels, "number of levels")->check(CLI::Range(0, 10000));
  yw->add_option("--out", yw_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  for (auto* o : seed_opts) {
    if (o->count()) g.seed = seed;
  }
  for (auto* o : thread_opts) {
    if (o->count()) g.threads = threads;
  }

  try {
    if (*check) return cmd_check(g, system_name);
    if (*sim) return cmd_simulate(g);
    if (*cpl) return cmd_couple(g);
    if (*cnv) return cmd_converge(g);
    if (*scn) return cmd_scan(g);
    if (*cbi) return cmd_cbi(g);
    if (*mom) return cmd_moment(g);
    if (*noi) return cmd_noise(g, stream);
    if (*yw) return cmd_yw(modulus, levels, yw_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", error_kind(e)}, {"message", e.what()}}.dump() << "\n";
    return 4;
  }
  return 1;
}
