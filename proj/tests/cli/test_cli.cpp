#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "cli/commands.hpp"

namespace fs = std::filesystem;
using bidomain::cli::Json;

namespace {

const fs::path kConfigs = BIDOMAIN_CONFIG_DIR;

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "bidomain");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = bidomain::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("bidomain_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Json read_json(const fs::path& path) { return Json::parse(slurp(path)); }

const std::string kSmallTorus = R"(
[grid]
points = [8, 8]
boundary = "periodic"
)";

}  // namespace

TEST_CASE("default config passes the operator checks") {
  const auto dir = scratch("check");
  const auto r = run_cli({"check-operator", "--config", (kConfigs / "default.toml").string(), "--out-dir", dir.string()});
  CHECK(r.code == 0);
  const Json report = read_json(dir / "check_operator.json");
  CHECK(report["pass"].get<bool>());
  for (const auto& c : report["checks"]) CHECK_MESSAGE(c["pass"].get<bool>(), c["name"].get<std::string>());
  const Json manifest = read_json(dir / "check-operator.manifest.json");
  CHECK(manifest["command"] == "check-operator");
  CHECK(manifest["outputs"] == Json::array({"check_operator.json"}));
  CHECK(manifest["config"]["checks"]["trials"] == 50);
  CHECK(manifest.contains("started_at"));
}

TEST_CASE("configuration errors exit with 2") {
  const auto dir = scratch("errors");
  auto expect_config_error = [&](const std::string& command, const std::string& toml, const std::string& needle) {
    const auto cfg = write_file(dir / "bad.toml", toml);
    const auto r = run_cli({command, "--config", cfg.string(), "--out-dir", (dir / "out").string()});
    CHECK(r.code == 2);
    CHECK_MESSAGE(r.err.find(needle) != std::string::npos, r.err);
  };
  SUBCASE("zero transverse conductance") {
    expect_config_error("check-operator", kSmallTorus + "[conductivity.intra]\nk_l = 3.0\nk_t = 0.0\n", "conductances");
  }
  SUBCASE("nonsymmetric tensor") {
    expect_config_error("check-operator",
                        kSmallTorus + "[conductivity.intra]\ntensor = [[1.0, 0.2], [0.3, 1.0]]\n", "not symmetric");
  }
  SUBCASE("empty moduli") { expect_config_error("probe", kSmallTorus + "[probe]\nmoduli = []\n", "modulus"); }
  SUBCASE("negative real lambda") {
    expect_config_error("probe", kSmallTorus + "[probe]\nmoduli = [1.0, 10.0]\nangles = [0.0, 3.141592653589793]\n",
                        "negative real axis");
    CHECK_FALSE(fs::exists(dir / "out" / "sweep.csv"));
  }
  SUBCASE("incompatible sources") {
    expect_config_error("simulate",
                        kSmallTorus + "[simulation]\nt_end = 0.1\n[simulation.sources]\nintra = { type = \"constant\", value = 1.0 }\n",
                        "cancel");
  }
  SUBCASE("oracle on variable coefficients") {
    expect_config_error("oracle-compare", kSmallTorus, "constant conductivities");
  }
  SUBCASE("bad TOML") { expect_config_error("probe", "[grid\npoints = 3", "TOML parse error"); }
  SUBCASE("missing file and bad flags") {
    CHECK(run_cli({"probe", "--config", (dir / "nope.toml").string()}).code == 2);
    CHECK(run_cli({"probe", "--threads", "0"}).code == 2);
    CHECK(run_cli({"frobnicate"}).code == 2);
    CHECK(run_cli({}).code == 2);
  }
}

TEST_CASE("trust region exit") {
  const auto dir = scratch("trust");
  const auto cfg = write_file(dir / "trust.toml", kSmallTorus + R"(
[simulation]
trust_region = 1e-3
t_end = 1.0
[simulation.initial]
u = { type = "constant", value = 1.0 }
)");
  const auto r = run_cli({"simulate", "--config", cfg.string(), "--out-dir", (dir / "out").string()});
  CHECK(r.code == 3);
  const Json summary = read_json(dir / "out" / "simulation_summary.json");
  CHECK(summary["status"]["state"] == "trust_region_exceeded");
  CHECK(summary["status"]["blow_up_time"] == 0.0);
  CHECK(fs::exists(dir / "out" / "timeseries.csv"));
  CHECK(read_json(dir / "out" / "simulate.manifest.json")["exit_code"] == 3);
}

TEST_CASE("probe outputs are deterministic") {
  const auto dir = scratch("determinism");
  const auto cfg = write_file(dir / "probe.toml", kSmallTorus + R"(
[probe]
moduli = { from_exp = 0, to_exp = 4, per_decade = 1 }
sources = 3
)");
  const auto a = run_cli({"probe", "--config", cfg.string(), "--seed", "7", "--out-dir", (dir / "a").string()});
  const auto b = run_cli({"probe", "--config", cfg.string(), "--seed", "7", "--threads", "3", "--out-dir",
                          (dir / "b").string()});
  // Replaying the manifest reproduces the run, seed included.
  const auto c = run_cli({"probe", "--config", (dir / "a" / "probe.manifest.json").string(), "--out-dir",
                          (dir / "c").string()});
  const auto d = run_cli({"probe", "--config", cfg.string(), "--seed", "8", "--out-dir", (dir / "d").string()});
  CHECK(a.code == 0);
  CHECK(b.code == 0);
  CHECK(c.code == 0);
  for (const char* f : {"sweep.csv", "sweep_summary.json"}) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "c" / f));
  }
  CHECK(slurp(dir / "a" / "sweep.csv") != slurp(dir / "d" / "sweep.csv"));
  CHECK(read_json(dir / "c" / "probe.manifest.json")["seed"] == 7);
  CHECK(read_json(dir / "a" / "probe.manifest.json")["config"] == read_json(dir / "c" / "probe.manifest.json")["config"]);
}

TEST_CASE("TOML and JSON configs are interchangeable") {
  const auto dir = scratch("formats");
  const auto toml = write_file(dir / "c.toml", kSmallTorus + R"(
[conductivity.intra]
tensor = [[2.0, 0.4], [0.4, 0.5]]
[conductivity.extra]
tensor = [[1.0, -0.2], [-0.2, 1.3]]
[oracle]
lambdas = [[1.0, 0.0], [0.0, 100.0]]
)");
  const auto json = write_file(dir / "c.json", R"({
  "grid": {"points": [8, 8], "boundary": "periodic"},
  "conductivity": {"intra": {"tensor": [[2.0, 0.4], [0.4, 0.5]]}, "extra": {"tensor": [[1.0, -0.2], [-0.2, 1.3]]}},
  "oracle": {"lambdas": [[1.0, 0.0], [0.0, 100.0]]}
})");
  CHECK(run_cli({"oracle-compare", "--config", toml.string(), "--out-dir", (dir / "t").string()}).code == 0);
  CHECK(run_cli({"oracle-compare", "--config", json.string(), "--out-dir", (dir / "j").string()}).code == 0);
  CHECK(slurp(dir / "t" / "oracle_compare.json") == slurp(dir / "j" / "oracle_compare.json"));
}

TEST_CASE("bundled configs") {
  const auto dir = scratch("bundled");
  SUBCASE("reflection oracle on a box") {
    const auto r = run_cli({"oracle-compare", "--config", (kConfigs / "oracle-box.toml").string(), "--out-dir",
                            dir.string()});
    CHECK(r.code == 0);
    CHECK(read_json(dir / "oracle_compare.json")["mode"] == "reflection");
  }
  SUBCASE("fractional powers") {
    CHECK(run_cli({"fractional", "--config", (kConfigs / "fractional-box.toml").string(), "--out-dir", dir.string()})
              .code == 0);
  }
  SUBCASE("FitzHugh-Nagumo pulse") {
    const auto r = run_cli({"simulate", "--config", (kConfigs / "fhn-pulse.toml").string(), "--out-dir", dir.string()});
    CHECK(r.code == 0);
    const Json summary = read_json(dir / "simulation_summary.json");
    CHECK(summary["status"]["state"] == "completed");
    CHECK(summary["front"]["speed"].get<double>() > 0.0);
    const std::string ts = slurp(dir / "timeseries.csv");
    CHECK(ts.rfind("t,u_sup,w_sup,compatibility_defect,step_residual", 0) == 0);
    CHECK(fs::exists(dir / "fields" / "state_000000_u.bdk"));
    CHECK(fs::exists(dir / "activation_times.bdk"));
  }
}
