#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "jsde/config.hpp"
#include "jsde/manifest.hpp"
#include "jsde/noise_io.hpp"
#include "jsde/run_config.hpp"

using namespace jsde;

namespace {

std::shared_ptr<const NoiseModel> jumpy_model(std::uint64_t seed) {
  NoiseSpec s;
  s.nu0 = LevyMeasure::stable(1.5);
  s.nu1 = LevyMeasure::point_mass(0.5, 3.0, MeasureRole::Subordinator);
  s.epsilon = 0.05;
  s.small_mode = SmallJumpMode::GaussianSubstitute;
  s.master_seed = seed;
  return NoiseModel::build(s, 1);
}

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("jsde-test-" + name);
  std::filesystem::remove_all(p);
  return p;
}

Scalar random_scalar(std::mt19937_64& gen, bool in_list) {
  std::uniform_int_distribution<int> kind(0, 3);
  switch (kind(gen)) {
    case 0: return gen() % 2 == 0;
    case 1: return static_cast<std::int64_t>(gen());
    case 2: {
      double d;
      do {
        d = std::bit_cast<double>(gen());
      } while (std::isnan(d));
      return d;
    }
    default: {
      // strings may hold anything but newlines; lists also exclude quotes
      const std::string chars = in_list ? "abz09 ,._-#;=[]" : "abz09 ,._-#;=[]\"";
      std::string s;
      const int n = static_cast<int>(gen() % 8);
      for (int i = 0; i < n; ++i) s += chars[gen() % chars.size()];
      return s;
    }
  }
}

ConfigDoc random_doc(std::mt19937_64& gen) {
  ConfigDoc d;
  const int sections = 1 + static_cast<int>(gen() % 4);
  for (int i = 0; i < sections; ++i) {
    ConfigSection s;
    s.name = (i % 2 ? "system.s" : "measure.m") + std::to_string(i);
    const int keys = static_cast<int>(gen() % 6);
    for (int k = 0; k < keys; ++k) {
      Value v;
      if (gen() % 4 == 0) {
        v.list = true;
        const int n = static_cast<int>(gen() % 4);
        for (int j = 0; j < n; ++j) v.items.push_back(random_scalar(gen, true));
      } else {
        v.items.push_back(random_scalar(gen, false));
      }
      s.entries.push_back({"key_" + std::to_string(k), v});
    }
    d.sections.push_back(s);
  }
  return d;
}

}  // namespace

TEST_CASE("typed scalars", "[io]") {
  const auto doc = parse_config_string(
      "# comment\n"
      "[run]\n"
      "seed = 42\n"
      "big = -9007199254740993\n"
      "x = 1.5\n"
      "y = 2e-3\n"
      "z = +3\n"
      "flag = true\n"
      "name = hello\n"
      "quoted = \"12\"\n"
      "grid = [1.2, 1.5, 2]\n"
      "empty = []\n"
      "; another comment\n");
  const ConfigSection& s = *doc.find("run");
  CHECK(s.integer("seed") == 42);
  CHECK(s.integer("big") == -9007199254740993LL);
  CHECK(s.real("x") == 1.5);
  CHECK(s.real("y") == 2e-3);
  CHECK(s.integer("z") == 3);
  CHECK(s.real("seed") == 42.0);
  CHECK(s.boolean("flag", false));
  CHECK(s.string("name") == "hello");
  CHECK(s.string("quoted") == "12");
  CHECK(s.reals("grid") == std::vector<double>{1.2, 1.5, 2.0});
  CHECK(s.reals("empty").empty());
  CHECK_THROWS_AS(s.integer("x"), ConfigError);
  CHECK_THROWS_AS(s.real("name"), ConfigError);
  CHECK_THROWS_AS(s.real("grid"), ConfigError);
  CHECK_THROWS_AS(s.real("missing"), ConfigError);
  CHECK(s.real("missing", 7.0) == 7.0);
  try {
    (void)s.string("x");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "[run].x");
  }
}

TEST_CASE("config syntax errors carry a line number", "[io]") {
  auto line_of = [](const std::string& text) {
    try {
      (void)parse_config_string(text);
    } catch (const ConfigError& e) {
      return e.line();
    }
    return -1;
  };
  CHECK(line_of("[run]\nseed = 1\nthis line has no equals sign\n") == 3);
  CHECK(line_of("[run]\nseed = 1\nseed = 2\n") == 3);
  CHECK(line_of("[run]\n[run]\n") == 2);
  try {
    (void)parse_config_string("[run]\ngrid = [1, 2\n");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "[run].grid");
  }
  CHECK_THROWS_AS(parse_config_string("top = 1\n[run]\n"), ConfigError);
}

TEST_CASE("config round trip", "[io]") {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 300; ++trial) {
    const ConfigDoc d = random_doc(gen);
    const std::string text = serialize_config(d);
    const ConfigDoc back = parse_config_string(text);
    REQUIRE(back == d);
    CHECK(serialize_config(back) == text);
  }
  for (const char* f : {"/cbi-example.cfg", "/linear-moment.cfg"}) {
    const ConfigDoc d = load_config(std::string(JSDE_CONFIGS) + f);
    CHECK(parse_config_string(serialize_config(d)) == d);
  }
}

TEST_CASE("run configuration resolves references", "[io]") {
  const RunConfig rc = load_run_config(std::string(JSDE_CONFIGS) + "/cbi-example.cfg");
  CHECK(rc.seed == 20240611);
  CHECK(rc.systems.count("cbi") == 1);
  const auto& sys = rc.system("cbi");
  CHECK(sys.system.family == "cbi");
  CHECK(sys.nu0 == "stable");
  CHECK(sys.nu1.empty());
  const auto& conv = rc.experiment("", ExperimentKind::Converge);
  CHECK(conv.name == "converge");
  CHECK(conv.spec.base_cells == 1000);
  CHECK(conv.spec.levels == 4);
  CHECK(conv.spec.paths == 1000);
  CHECK(conv.spec.sim.mode == SimMode::Nonneg);
  CHECK(conv.spec.noise.master_seed == rc.seed);
  CHECK(conv.spec.noise.has_brownian);
  REQUIRE(conv.spec.noise.nu0);
  CHECK(conv.spec.noise.nu0->as<StablePositive>()->alpha == 1.5);
  const auto& scan = rc.experiment("scan", ExperimentKind::Scan);
  CHECK(scan.alphas == std::vector<double>{1.2, 1.5, 1.8});
  const auto tpl = power_template(scan.spec.system);
  CHECK(tpl.beta == -0.5);
  CHECK(tpl.b == 0.1);
  CHECK_THROWS_AS(rc.experiment("scan", ExperimentKind::Converge), ConfigError);

  const RunConfig over = load_run_config(std::string(JSDE_CONFIGS) + "/cbi-example.cfg", 5);
  CHECK(over.seed == 5);
  CHECK(over.experiment("converge").spec.noise.master_seed == 5);
}

TEST_CASE("run configuration errors name the field", "[io]") {
  auto field_of = [](const std::string& text) {
    try {
      (void)resolve_config(parse_config_string(text));
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("no error");
  };
  CHECK(field_of("[system.z]\nfamily = zero\n") == "[run].seed");
  CHECK(field_of("[run]\nseed = 1\n[system.z]\nfamily = zero\nnu0 = nope\n") == "[system.z].nu0");
  CHECK(field_of("[run]\nseed = 1\n[system.z]\nfamily = zero\ntypo = 1\n") == "[system.z].typo");
  CHECK(field_of("[run]\nseed = 1\n[system.z]\nfamily = warp\n") == "[system.z].family");
  CHECK(field_of("[run]\nseed = -1\n") == "[run].seed");
  CHECK(field_of("[run]\nseed = 1\nformat = xml\n") == "[run].format");
  CHECK(field_of("[run]\nseed = 1\n[measure.m]\nkind = stable\nalpha = 1.5\nrole = subordinator\n") ==
        "[measure.m]");
  CHECK(field_of("[run]\nseed = 1\n[system.z]\nfamily = zero\n[experiment.e]\ntype = converge\nsystem = z\n"
                 "paths = 10\n") == "[experiment.e]");
  CHECK(field_of("[run]\nseed = 1\n[system.z]\nfamily = zero\n[experiment.e]\ntype = cbi\nsystem = z\n") ==
        "[experiment.e].system");
  CHECK(field_of("[run]\nseed = 1\n[sistem.z]\n") == "[sistem.z]");
  CHECK(field_of("[run]\nseed = 1\n[system.z]\nfamily = zero\nrho = cubic\n") == "[system.z].rho");
}

TEST_CASE("system families from configuration", "[io]") {
  const auto rc = resolve_config(parse_config_string(
      "[run]\nseed = 1\n"
      "[measure.imm]\nkind = point-mass\nlocation = 1\nmass = 2\nrole = subordinator\n"
      "[measure.tab]\nkind = finite\nlaw = exponential\nmean = 0.5\nrate = 3\n"
      "[system.pd]\nfamily = power-diffusion\ns = 2\ngamma = 0.5\nbeta = -1\n"
      "[system.ct]\nfamily = custom-tabulated\nsigma_knots = [0, 1]\nsigma_values = [0, 2]\n"
      "drift_knots = [-1, 1]\ndrift_values = [1, -1]\nK = 8\nrho = linear:2\n"
      "[system.c]\nfamily = cbi\nq = 2\nnu0 = tab\nnu1 = imm\nrequested = [strong-uniqueness]\n"));
  const auto& pd = rc.system("pd").system;
  CHECK(pd.diffusion(4.0) == 4.0);
  CHECK(pd.diffusion(-4.0) == 4.0);
  CHECK(pd.drift(2.0) == -2.0);
  CHECK(pd.reg.K == 5.0);
  const auto& ct = rc.system("ct").system;
  CHECK(ct.diffusion(0.5) == 1.0);
  CHECK(ct.diffusion(2.0) == 4.0);  // linear past the last knot
  CHECK(ct.drift(0.25) == -0.25);
  CHECK(ct.reg.K == 8.0);
  CHECK(ct.reg.rho->family == Modulus::Family::Linear);
  const auto& c = rc.system("c");
  CHECK(c.system.has_jump1());  // immigration on because nu1 is declared
  CHECK(c.requested == std::vector<std::string>{"strong-uniqueness"});
  CHECK(parse_modulus("power:0.5:2").scale == 2.0);
  CHECK(parse_modulus("log").family == Modulus::Family::LogOsgood);
  CHECK_THROWS_AS(parse_modulus("power"), FormatError);
}

TEST_CASE("noise binary format", "[io]") {
  const auto model = jumpy_model(31);
  auto path = refine(sample_noise(model, 16, 4), uniform_grid(1.0, 64));
  REQUIRE(!path.jumps.empty());
  std::stringstream buf;
  write_noise_binary(buf, path);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 4) == "LVYP");
  CHECK(bytes.size() == 4 + 4 + 5 * 8 + 65 * 8 + 2 * 64 * 8 + path.jumps.size() * 17);
  // little-endian header: version 1, grid length 65
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);
  CHECK(static_cast<unsigned char>(bytes[8]) == 65);

  const NoisePath back = read_noise_binary(buf, model);
  CHECK(back.grid == path.grid);
  CHECK(back.brownian == path.brownian);
  CHECK(back.small == path.small);
  CHECK(back.jumps == path.jumps);
  CHECK(back.provenance == path.provenance);
  CHECK(back.model == model);
  // a reloaded path refines exactly like the original
  const auto grid = uniform_grid(1.0, 256);
  CHECK(refine(back, grid).brownian == refine(path, grid).brownian);

  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_noise_binary(truncated), FormatError);
  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream bad_magic(bad);
  CHECK_THROWS_AS(read_noise_binary(bad_magic), FormatError);
  std::istringstream wrong_model(bytes);
  CHECK_THROWS_AS(read_noise_binary(wrong_model, jumpy_model(32)), FormatError);

  const auto dir = scratch("noise");
  std::filesystem::create_directories(dir);
  save_noise((dir / "p.lvyp").string(), path);
  CHECK(load_noise((dir / "p.lvyp").string()).brownian == path.brownian);
  std::filesystem::remove_all(dir);
}

TEST_CASE("noise CSV export", "[io]") {
  const auto path = sample_noise(jumpy_model(33), 4, 0);
  std::ostringstream inc, jumps;
  write_noise_csv(inc, path);
  write_jumps_csv(jumps, path);
  std::istringstream in(inc.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,brownian_increment,small_jump_increment");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 4);
  std::istringstream jin(jumps.str());
  std::getline(jin, line);
  CHECK(line == "t,z,mark");
  std::size_t jrows = 0, driver1 = 0;
  while (std::getline(jin, line)) {
    ++jrows;
    driver1 += line.find(",driver1") != std::string::npos;
  }
  CHECK(jrows == path.jumps.size());
  CHECK(driver1 == static_cast<std::size_t>(std::count_if(path.jumps.begin(), path.jumps.end(),
                                                          [](const Jump& j) { return j.mark == Mark::Driver1; })));
}

TEST_CASE("manifest lists every output with its hash", "[io]") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const auto dir = scratch("manifest");
  OutputSet out(dir, "both");
  out.write("a.csv", "t,x\n0,1\n");
  out.write_json("b.json", {{"k", 1}});
  const auto meta = out.write_manifest({{"seed", 3}});
  REQUIRE(meta["outputs"].size() == 2);
  std::size_t listed = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name == "manifest.json") continue;
    bool found = false;
    for (const auto& o : meta["outputs"]) {
      if (o["file"] == name) {
        found = true;
        CHECK(o["sha256"] == sha256_hex(read_file(entry.path())));
        CHECK(o["bytes"] == std::filesystem::file_size(entry.path()));
      }
    }
    CHECK(found);
    ++listed;
  }
  CHECK(listed == 2);
  const auto disk = nlohmann::json::parse(read_file(dir / "manifest.json"));
  CHECK(disk["seed"] == 3);
  CHECK(disk["versions"].contains("jsde"));
  std::filesystem::remove_all(dir);
}
